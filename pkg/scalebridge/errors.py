"""
Excepciones del paquete scalebridge.

Cada clase lleva el código de salida que usa la línea de comandos:
2 para uso/configuración, 3 para evaluación y 4 para la simulación.
"""

from typing import Optional


class ScalebridgeError(Exception):
    """Error base del paquete."""

    exit_code = 1


# --- uso / configuración (2) ---

class ConfigError(ScalebridgeError):
    """Configuración o argumentos inválidos."""

    exit_code = 2


class LexError(ScalebridgeError):
    """Carácter no reconocido en una expresión.

    Args:
        message: Descripción del error
        position: Desplazamiento (0-based) dentro de la línea de entrada
    """

    exit_code = 2

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ExpressionSyntaxError(ScalebridgeError):
    """Token inesperado o relación mal formada."""

    exit_code = 2

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


# --- evaluación (3) ---

class EvaluationError(ScalebridgeError):
    exit_code = 3


class DimensionMismatch(EvaluationError):
    """Suma, resta o comparación entre dimensiones distintas."""


class DivisionByZero(EvaluationError):
    pass


class QuantityOverflow(EvaluationError):
    """El resultado de una operación no es finito."""


class NegativeBase(EvaluationError):
    """Potencia fraccionaria de una magnitud negativa."""


class NonPositive(EvaluationError):
    """Logaritmo de una magnitud cero o negativa."""


class UnknownSymbol(EvaluationError):
    def __init__(self, symbol: str, context: Optional[str] = None):
        message = f"Unknown symbol '{symbol}'"
        if context:
            message = f"{context}: {message}"
        super().__init__(message)
        self.symbol = symbol


class NotIsolatable(EvaluationError):
    """La incógnita no puede despejarse algebraicamente."""


# --- simulación (4) ---

class SimulationError(ScalebridgeError):
    exit_code = 4


class UnresolvedPacket(SimulationError):
    """El paquete de ondas es demasiado estrecho para la malla."""


class BoundaryContamination(SimulationError):
    """La amplitud en los bordes de la caja supera el umbral permitido."""


class MaskEmpty(SimulationError):
    pass


class DriftUnavailable(SimulationError):
    """No hay campo de deriva para el instante pedido."""


class BandwidthTooSmall(SimulationError):
    pass


class AccuracyGuardExceeded(SimulationError):
    """El paso temporal supera la guarda de precisión dx²·m/ħ."""
