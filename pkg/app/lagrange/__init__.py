"""
拉格朗日映射模块
"""

from .densities import (
    euler_lagrange_residual,
    lagrangian_densities,
    magnetic_stress,
    map_reconstruct,
    reconstruction_mismatch,
)
from .geometry import MapGeometry, cofactor_divergence, map_geometry, position_gradient
from .map import (
    AnalyticSampler,
    DesynchronizedError,
    FieldSampler,
    InsufficientHistoryError,
    LagrangianMap,
    MapFoldingError,
    VelocitySampler,
    advance_map,
    sync_map,
)

__all__ = [
    "LagrangianMap",
    "VelocitySampler",
    "FieldSampler",
    "AnalyticSampler",
    "advance_map",
    "sync_map",
    "MapGeometry",
    "map_geometry",
    "cofactor_divergence",
    "position_gradient",
    "map_reconstruct",
    "reconstruction_mismatch",
    "lagrangian_densities",
    "magnetic_stress",
    "euler_lagrange_residual",
    "MapFoldingError",
    "DesynchronizedError",
    "InsufficientHistoryError",
]
