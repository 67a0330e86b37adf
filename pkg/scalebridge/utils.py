"""
Funciones de utilidad para ficheros de salida.
"""

import re
import logging
from pathlib import Path
from typing import Optional

logger = logging.getLogger(__name__)


def sanitize_filename(filename: Optional[str]) -> str:
    """Sanitiza un nombre de archivo para que sea válido en el sistema de archivos.

    Args:
        filename: Nombre de archivo a sanitizar

    Returns:
        Nombre de archivo sanitizado
    """
    if filename is None:
        return 'unknown'
    filename = re.sub(r'[<>:"/\\|?*\'\s]', '_', filename.strip())
    return filename if filename else 'unknown'


def field_dump_filename(fixture: str, time: float) -> str:
    """Nombre del volcado de campos de un fotograma, p. ej. ``harmonic_fields_t2.5000.csv``.

    Args:
        fixture: Nombre del escenario
        time: Tiempo del fotograma
    """
    return f"{sanitize_filename(fixture)}_fields_t{time:.4f}.csv"


def ensure_directory(path) -> Path:
    """Asegura que un directorio exista, creándolo si es necesario.

    Args:
        path: Ruta del directorio

    Returns:
        Objeto Path del directorio
    """
    dir_path = Path(path)
    dir_path.mkdir(parents=True, exist_ok=True)
    logger.debug(f"Output directory ready: {dir_path}")
    return dir_path
