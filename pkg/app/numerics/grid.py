"""
周期结构网格与场容器
所有算子、求解器与映射都在同一种周期网格上工作，nz=1 表示 2.5D
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np


class GridError(ValueError):
    """网格参数不合法"""


class NonFiniteFieldError(ValueError):
    """场或坐标中出现 NaN/Inf"""

    def __init__(self, message: str, name: Optional[str] = None):
        super().__init__(message)
        self.name = name


@dataclass(frozen=True)
class Grid:
    """
    周期结构网格

    节点位于 x_i = i·h (i = 0..n-1)，h = L/n。
    计数为 1 的维度视为非活动维度 (该方向导数恒为 0)。
    """

    nx: int
    ny: int
    nz: int = 1
    Lx: float = 2.0 * np.pi
    Ly: float = 2.0 * np.pi
    Lz: float = 2.0 * np.pi
    order: int = 4

    def __post_init__(self):
        self.validate()

    def validate(self) -> bool:
        """检查计数、长度与差分阶数"""
        if self.order < 2 or self.order % 2:
            raise GridError(f"差分阶数必须为不小于 2 的偶数: order={self.order}")
        counts = (self.nx, self.ny, self.nz)
        if any(int(n) != n or n < 1 for n in counts):
            raise GridError(f"网格计数必须为正整数: {counts}")
        if not any(n > 1 for n in counts):
            raise GridError("至少需要一个活动维度")
        for axis, (n, length) in enumerate(zip(counts, self.lengths)):
            if not np.isfinite(length) or length <= 0:
                raise GridError(f"第 {axis} 维长度必须为正: L={length}")
            if n > 1 and n < 4 * self.order:
                raise GridError(
                    f"第 {axis} 维点数 {n} 小于模板支撑 4·order={4 * self.order}"
                )
        return True

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def lengths(self) -> Tuple[float, float, float]:
        return (float(self.Lx), float(self.Ly), float(self.Lz))

    @property
    def spacing(self) -> Tuple[float, float, float]:
        return tuple(length / n for length, n in zip(self.lengths, self.shape))

    @property
    def active(self) -> Tuple[bool, bool, bool]:
        return tuple(n > 1 for n in self.shape)

    @property
    def is_2p5d(self) -> bool:
        return self.nz == 1

    @property
    def min_spacing(self) -> float:
        return min(h for h, a in zip(self.spacing, self.active) if a)

    @property
    def cell_volume(self) -> float:
        hx, hy, hz = self.spacing
        return hx * hy * hz

    @property
    def volume(self) -> float:
        return self.Lx * self.Ly * self.Lz

    def coords(self) -> np.ndarray:
        """节点坐标，形状 (3, nx, ny, nz)"""
        axes = [np.arange(n) * h for n, h in zip(self.shape, self.spacing)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    def zeros(self, components: int = 0) -> np.ndarray:
        if components:
            return np.zeros((components,) + self.shape)
        return np.zeros(self.shape)

    def refine(self, factor: int = 2) -> "Grid":
        """活动维度按 factor 加密"""
        counts = [n * factor if n > 1 else 1 for n in self.shape]
        return Grid(*counts, self.Lx, self.Ly, self.Lz, self.order)

    def describe(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "nz": self.nz, "order": self.order}


@dataclass
class ScalarField:
    """网格上的标量场"""

    grid: Grid
    values: np.ndarray
    name: str = ""

    COMPONENTS = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.validate()

    @property
    def expected_shape(self) -> Tuple[int, ...]:
        return self.grid.shape

    def validate(self) -> bool:
        if self.values.shape != self.expected_shape:
            raise GridError(
                f"场 {self.name or '?'} 形状 {self.values.shape} "
                f"与网格 {self.expected_shape} 不符"
            )
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteFieldError(f"场 {self.name or '?'} 含非有限值", self.name)
        return True

    def with_values(self, values: np.ndarray, name: Optional[str] = None):
        return type(self)(self.grid, values, self.name if name is None else name)

    def linf(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


@dataclass
class VectorField(ScalarField):
    """网格上的三分量矢量场 (2.5D 时仍保留 z 分量)"""

    COMPONENTS = 3

    @property
    def expected_shape(self) -> Tuple[int, ...]:
        return (3,) + self.grid.shape

    def linf(self) -> float:
        return float(np.max(np.sqrt(np.sum(self.values**2, axis=0))))


def as_field(grid: Grid, values: np.ndarray, name: str = "") -> ScalarField:
    """按数组维数包装为标量场或矢量场"""
    values = np.asarray(values, dtype=float)
    if values.ndim == 4:
        return VectorField(grid, values, name)
    return ScalarField(grid, values, name)
