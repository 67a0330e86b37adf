"""
Escritura de las tablas de resultados (CSV) de la simulación.
"""

import logging
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import pandas as pd

from scalebridge.wavefunction import FieldOnGrid, WavefunctionGrid, madelung, nelson_drift, quantum_potential

logger = logging.getLogger(__name__)

# 9 cifras significativas
FLOAT_FORMAT = '%.8e'

FIELD_COLUMNS = ['x', 'rho', 'S', 'Vq', 'b']


def save_to_csv(data: Union[pd.DataFrame, List[Dict]], filename: Union[str, Path]) -> None:
    """Guarda una tabla en un archivo CSV.

    Args:
        data: DataFrame o lista de filas
        filename: Nombre del archivo
    """
    df = data if isinstance(data, pd.DataFrame) else pd.DataFrame(data)
    if df.empty:
        logger.warning(f"No data to save for {filename}")
        return

    try:
        df.to_csv(filename, index=False, float_format=FLOAT_FORMAT, encoding='utf-8')
        logger.info(f"Saved {len(df)} rows to {filename}")
    except Exception as e:
        logger.error(f"Error saving {filename}: {e}")
        raise


def _masked(field: FieldOnGrid) -> np.ndarray:
    return np.where(field.mask, field.values, np.nan)


def field_table(grid: WavefunctionGrid) -> pd.DataFrame:
    """Tabla x, rho, S, Vq, b de un fotograma; NaN donde el campo está enmascarado."""
    rho, action = madelung(grid)
    return pd.DataFrame({
        'x': grid.geometry.x,
        'rho': rho.values,
        'S': _masked(action),
        'Vq': _masked(quantum_potential(rho, grid.units)),
        'b': _masked(nelson_drift(grid)),
    }, columns=FIELD_COLUMNS)
