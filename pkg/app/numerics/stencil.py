"""
周期中心差分算子
任意偶数阶模板，grad / div / curl 及张量梯度
"""

import logging
from math import factorial
from typing import Union

import numpy as np

from .grid import Grid, NonFiniteFieldError, ScalarField, VectorField

logger = logging.getLogger(__name__)


class DiffArityError(ValueError):
    """算子类型与场的分量数不匹配"""


def central_coefficients(order: int) -> np.ndarray:
    """
    一阶导数中心差分系数

    f'(x_i) ≈ Σ_k c_k (f_{i+k} - f_{i-k}) / h,  k = 1..order/2

    Args:
        order: 偶数精度阶

    Returns:
        长度为 order/2 的系数数组
    """
    if order < 2 or order % 2:
        raise ValueError(f"差分阶数必须为不小于 2 的偶数: {order}")
    m = order // 2
    return np.array(
        [
            (-1) ** (k + 1)
            * factorial(m) ** 2
            / (k * factorial(m - k) * factorial(m + k))
            for k in range(1, m + 1)
        ]
    )


class DiffOps:
    """
    绑定到某个网格的差分算子集合

    数组最后三个轴为网格轴，前面的轴 (分量) 原样保留，
    因此同一套算子可作用于标量、矢量与张量。
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        self.coefficients = central_coefficients(grid.order)

    def partial(self, f: np.ndarray, axis: int) -> np.ndarray:
        """沿第 axis 个网格轴求导，非活动维度返回 0"""
        if not self.grid.active[axis]:
            return np.zeros(np.shape(f))
        ax = np.ndim(f) - 3 + axis
        out = np.zeros(np.shape(f))
        for k, c in enumerate(self.coefficients, start=1):
            out += c * (np.roll(f, -k, axis=ax) - np.roll(f, k, axis=ax))
        return out / self.grid.spacing[axis]

    def grad(self, f: np.ndarray) -> np.ndarray:
        return np.stack([self.partial(f, j) for j in range(3)])

    def jacobian(self, v: np.ndarray) -> np.ndarray:
        """G[i, j] = ∂v_i/∂x_j"""
        return np.stack([self.partial(v, j) for j in range(3)], axis=1)

    def div(self, v: np.ndarray) -> np.ndarray:
        return self.partial(v[0], 0) + self.partial(v[1], 1) + self.partial(v[2], 2)

    def tensor_div(self, t: np.ndarray) -> np.ndarray:
        """(∇·T)_i = ∂_j T_ij"""
        return sum(self.partial(t[:, j], j) for j in range(3))

    def curl(self, v: np.ndarray) -> np.ndarray:
        return np.stack(
            [
                self.partial(v[2], 1) - self.partial(v[1], 2),
                self.partial(v[0], 2) - self.partial(v[2], 0),
                self.partial(v[1], 0) - self.partial(v[0], 1),
            ]
        )

    def advect(self, u: np.ndarray, f: np.ndarray) -> np.ndarray:
        """(u·∇) f，f 可为标量或矢量"""
        return sum(u[j] * self.partial(f, j) for j in range(3))


_ARITY = {"grad": 0, "div": 3, "curl": 3}


def apply_diff(
    kind: str, field: ScalarField, ops: DiffOps = None
) -> Union[ScalarField, VectorField]:
    """
    对场施加离散微分算子

    Args:
        kind: grad | div | curl
        field: 输入场 (grad 需标量场，div/curl 需矢量场)
        ops: 可复用的算子实例，缺省时按场的网格新建

    Returns:
        新的场对象
    """
    if kind not in _ARITY:
        raise DiffArityError(f"未知算子: {kind}")
    if field.COMPONENTS != _ARITY[kind]:
        raise DiffArityError(
            f"算子 {kind} 需要 {'矢量' if _ARITY[kind] else '标量'}场，"
            f"收到 {field.name or '?'}"
        )
    if not np.all(np.isfinite(field.values)):
        raise NonFiniteFieldError(f"场 {field.name or '?'} 含非有限值", field.name)
    ops = ops or DiffOps(field.grid)
    values = getattr(ops, kind)(field.values)
    name = f"{kind}({field.name})" if field.name else kind
    if kind == "div":
        return ScalarField(field.grid, values, name)
    return VectorField(field.grid, values, name)
