#!/usr/bin/env python3
"""
Script principal de scalebridge.

Comprueba el catálogo de coincidencias de grandes números, evalúa y resuelve
expresiones sobre el registro de constantes CGS-Gaussiano, ejecuta las
cadenas de derivación y lanza las simulaciones de mecánica estocástica.

Códigos de salida: 0 éxito, 1 fallo de comprobación o de umbral,
2 uso/configuración, 3 evaluación, 4 error de simulación.

Escenarios de ``simulate`` (JSON): fixture, n_points, dx, x_center, sigma0,
k0, omega, hbar_sim, mass_sim, dt, t_end, sample_every, n_paths, seed,
bandwidth, workers, brownian_dt, dump_times, max_l1, max_hj_residual,
max_variance_error, out_dir. Cualquier otra clave es un error (código 2).
"""

import sys
import json
import math
import logging
import argparse
from dataclasses import replace

import pandas as pd

from scalebridge.catalog import (
    builtin_catalog,
    catalog_environment,
    catalog_listing,
    export_catalog,
    load_catalog_file,
    report_to_json,
    report_to_table,
    run_catalog,
)
from scalebridge.chains import CHAINS, chain_to_json, chain_to_table, run_chain
from scalebridge.dimensions import format_magnitude
from scalebridge.errors import ConfigError, ScalebridgeError
from scalebridge.expressions import evaluate, format_expr, parse_expression
from scalebridge.registry import parse_registry_line, registry_from_sources
from scalebridge.relations import isolate, parse_relation, solve_for
from scalebridge.scenario import (
    fixture_scenario,
    load_scenario,
    run_scenario,
    summary_to_dict,
    summary_to_text,
    validate_scenario,
)

# Configuración de logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def _registry_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument('--registry', type=str, default=None,
                        help='Fichero de constantes (symbol = value unit-expression)')
    parent.add_argument('--set', dest='overrides', action='append', nargs='+', default=[],
                        metavar='SYM=VAL [UNIT]',
                        help='Sobrescribe una constante; se puede repetir (gana la última)')
    return parent


def _format_option() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument('--format', choices=['table', 'json'], default='table',
                        help='Formato de salida (default: table)')
    return parent


def parse_args(argv=None):
    """Parsea argumentos de línea de comando.

    Returns:
        Argumentos parseados
    """
    parser = argparse.ArgumentParser(prog='scalebridge',
                                     description='Coincidencias de grandes números y mecánica estocástica')
    parser.add_argument('--verbose', '-v', action='store_true',
                        help='Mostrar información detallada durante la ejecución')
    registry_options = _registry_options()
    format_option = _format_option()
    commands = parser.add_subparsers(dest='command', required=True)

    catalog = commands.add_parser('catalog', parents=[format_option], help='Listar o exportar el catálogo')
    catalog.add_argument('action', choices=['list', 'export'])
    catalog.add_argument('--catalog', type=str, default=None, help='Fichero de catálogo alternativo')

    check = commands.add_parser('check', parents=[registry_options, format_option],
                                help='Evaluar todas las relaciones del catálogo')
    check.add_argument('--tol-decades', type=float, default=None,
                       help='Tolerancia en décadas para todas las relaciones ~')
    check.add_argument('--catalog', type=str, default=None, help='Fichero de catálogo alternativo')
    check.add_argument('--workers', type=int, default=1, help='Hilos para evaluar filas')

    evaluate_cmd = commands.add_parser('eval', parents=[registry_options], help='Evaluar una expresión')
    evaluate_cmd.add_argument('expression', type=str)

    solve = commands.add_parser('solve', parents=[registry_options, format_option],
                                help='Resolver una relación o ejecutar una cadena de derivación')
    solve.add_argument('relation', type=str, nargs='?', default=None)
    solve.add_argument('--for', dest='unknown', type=str, default=None, help='Símbolo a despejar')
    solve.add_argument('--chain', choices=sorted(CHAINS), default=None, help='Cadena de derivación')

    simulate = commands.add_parser('simulate', parents=[format_option], help='Ejecutar una simulación')
    simulate.add_argument('scenario', type=str, nargs='?', default=None, help='Escenario JSON')
    simulate.add_argument('--fixture', choices=['harmonic', 'free'], default=None)
    simulate.add_argument('--out', type=str, default=None, help='Directorio de salida')
    simulate.add_argument('--workers', type=int, default=None, help='Hilos para el conjunto')

    commands.add_parser('registry', parents=[registry_options, format_option],
                        help='Mostrar el registro de constantes activo')
    return parser.parse_args(argv)


def build_registry_from_args(args):
    """Registro por defecto → SCALEBRIDGE_REGISTRY → --registry → --set."""
    overrides = []
    for words in args.overrides:
        parsed = parse_registry_line(' '.join(words))
        if parsed is None:
            raise ConfigError(f"Empty --set override: {' '.join(words)!r}")
        overrides.append(parsed)
    return registry_from_sources(args.registry, overrides)


def cmd_catalog(args) -> int:
    entries = load_catalog_file(args.catalog) if args.catalog else builtin_catalog()
    if args.action == 'export':
        sys.stdout.write(export_catalog(entries))
        return 0
    rows = catalog_listing(entries)
    if args.format == 'json':
        print(json.dumps({'entries': rows}, indent=2, ensure_ascii=False))
    else:
        df = pd.DataFrame(rows, columns=['name', 'paper_tag', 'tol_decades', 'relation'])
        print(df.to_string(index=False))
    return 0


def cmd_check(args) -> int:
    if args.tol_decades is not None and not (math.isfinite(args.tol_decades) and args.tol_decades >= 0):
        raise ConfigError(f"--tol-decades must be a finite number >= 0, got {args.tol_decades}")
    registry = build_registry_from_args(args)
    entries = load_catalog_file(args.catalog) if args.catalog else builtin_catalog()
    report = run_catalog(entries, registry, args.tol_decades, workers=args.workers)
    print(report_to_json(report) if args.format == 'json' else report_to_table(report))
    for row in report.live_failures:
        logger.warning(f"{row.name} failed: log10 ratio {row.verdict.log10_ratio:+.3f} "
                       f"(tolerance {row.verdict.tol_decades:g})")
    return 0 if report.overall_pass else 1


def cmd_eval(args) -> int:
    registry = build_registry_from_args(args)
    value = evaluate(parse_expression(args.expression), catalog_environment(registry))
    print(value)
    return 0


def cmd_solve(args) -> int:
    registry = build_registry_from_args(args)
    if args.chain:
        if args.relation:
            raise ConfigError("Use either a relation or --chain, not both")
        report = run_chain(args.chain, registry)
        print(chain_to_json(report) if args.format == 'json' else chain_to_table(report))
        return 0 if report.passed else 1
    if not args.relation or not args.unknown:
        raise ConfigError("solve needs a RELATION and --for SYM (or --chain NAME)")
    rel = parse_relation(args.relation)
    closed_form = isolate(rel, args.unknown)
    value = solve_for(rel, args.unknown, catalog_environment(registry))
    if args.format == 'json':
        print(json.dumps({'symbol': args.unknown, 'closed_form': format_expr(closed_form),
                          'value': format_magnitude(value.magnitude), 'dimension': str(value.dimension)}, indent=2))
    else:
        print(f"{args.unknown} = {format_expr(closed_form)}")
        print(value)
    return 0


def cmd_simulate(args) -> int:
    if args.scenario and args.fixture:
        raise ConfigError("Use either a scenario file or --fixture, not both")
    if args.scenario:
        scenario = load_scenario(args.scenario)
    else:
        scenario = fixture_scenario(args.fixture or 'harmonic')
    if args.workers is not None:
        scenario = validate_scenario(replace(scenario, workers=args.workers))
    summary = run_scenario(scenario, args.out)
    if args.format == 'json':
        print(json.dumps(summary_to_dict(summary), indent=2))
    else:
        print(summary_to_text(summary))
    return 0 if summary.passed else 1


def cmd_registry(args) -> int:
    registry = build_registry_from_args(args)
    rows = registry.describe()
    if args.format == 'json':
        print(json.dumps({'unit_system': registry.unit_system, 'fingerprint': registry.fingerprint(),
                          'entries': rows}, indent=2, ensure_ascii=False))
    else:
        df = pd.DataFrame(rows, columns=['symbol', 'value', 'dimension', 'derived', 'description'])
        print(df.to_string(index=False))
        print(f"\nunit system: {registry.unit_system}  fingerprint: {registry.fingerprint()[:16]}")
    return 0


COMMANDS = {
    'catalog': cmd_catalog,
    'check': cmd_check,
    'eval': cmd_eval,
    'solve': cmd_solve,
    'simulate': cmd_simulate,
    'registry': cmd_registry,
}


def main(argv=None) -> int:
    """Función principal del script.

    Returns:
        Código de salida del proceso
    """
    args = parse_args(argv)

    # Configurar nivel de logging
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
        logger.debug("Modo verbose activado")

    try:
        return COMMANDS[args.command](args)
    except ScalebridgeError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except Exception as e:
        logger.error(f"Process failed: {e}")
        raise


if __name__ == '__main__':
    sys.exit(main())
