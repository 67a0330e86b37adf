"""
Calculadora de coincidencias de grandes números en unidades CGS-Gaussianas
y laboratorio numérico de mecánica estocástica de Nelson.
"""

__version__ = '0.1.0'
