"""
热力学模块
"""

from .eos import EosDomainError, EquationOfState, PolytropicEos, ThermoState, eos_eval

__all__ = [
    "EquationOfState",
    "PolytropicEos",
    "ThermoState",
    "eos_eval",
    "EosDomainError",
]
