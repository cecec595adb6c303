"""
映射几何量: J = det F，余子式 A = cof(F)
"""

from dataclasses import dataclass

import numpy as np

from app.numerics import DiffOps
from app.numerics.algebra import cofactor, determinant, identity

from .map import LagrangianMap, MapFoldingError


@dataclass
class MapGeometry:
    J: np.ndarray
    A: np.ndarray


def map_geometry(lmap: LagrangianMap) -> MapGeometry:
    """逐示踪点的 Jacobian 与余子式矩阵，J ≤ 0 时报错并给出位置"""
    J = determinant(lmap.F)
    if np.any(J <= 0):
        where = tuple(int(i) for i in np.unravel_index(np.argmin(J), J.shape))
        raise MapFoldingError(f"J ≤ 0: J={J[where]:.3e}，标签位置 {where}", where)
    return MapGeometry(J=J, A=cofactor(lmap.F))


def cofactor_divergence(geometry: MapGeometry, label_ops: DiffOps) -> np.ndarray:
    """∂A_kj/∂x0^j，连续情形恒为零，离散为截断误差"""
    return label_ops.tensor_div(geometry.A)


def position_gradient(lmap: LagrangianMap, label_ops: DiffOps) -> np.ndarray:
    """
    由位置做标签差分得到的 F (交叉检验用)

    位移是周期的，因此 F = I + ∇0(位移) 不受折返影响
    """
    return identity(lmap.grid.shape) + label_ops.jacobian(lmap.displacement)
