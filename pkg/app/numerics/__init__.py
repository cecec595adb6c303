"""
离散微积分模块
周期网格、场容器、中心差分算子与插值
"""

from .grid import Grid, GridError, NonFiniteFieldError, ScalarField, VectorField, as_field
from .interp import PeriodicInterpolator, interpolate
from .stencil import DiffArityError, DiffOps, apply_diff, central_coefficients

__all__ = [
    # 网格与场
    "Grid",
    "ScalarField",
    "VectorField",
    "as_field",
    # 算子
    "DiffOps",
    "apply_diff",
    "central_coefficients",
    "PeriodicInterpolator",
    "interpolate",
    # 异常
    "GridError",
    "NonFiniteFieldError",
    "DiffArityError",
]
