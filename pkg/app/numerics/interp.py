"""
周期插值
基于 scipy.ndimage 的 B 样条 (默认三次)，非活动维度在插值前去掉
"""

from typing import Optional

import numpy as np
from scipy import ndimage

from .grid import Grid, NonFiniteFieldError, ScalarField


class PeriodicInterpolator:
    """
    在周期网格上对标量/矢量/张量数组采样

    使用示例:
        interp = PeriodicInterpolator(grid)
        coeffs = interp.prefilter(state.rho)
        rho_at = interp.sample(state.rho, points, coefficients=coeffs)
    """

    def __init__(self, grid: Grid, order: int = 3):
        if order not in (1, 3, 5):
            raise ValueError(f"插值阶数仅支持 1/3/5: {order}")
        self.grid = grid
        self.order = order
        self._axes = [a for a in range(3) if grid.active[a]]

    def _reduce(self, values: np.ndarray) -> np.ndarray:
        index = tuple(slice(None) if a else 0 for a in self.grid.active)
        return values[(Ellipsis,) + index]

    def prefilter(self, values: np.ndarray) -> np.ndarray:
        """样条系数；分量轴逐一处理"""
        reduced = self._reduce(np.asarray(values, dtype=float))
        lead = reduced.shape[: reduced.ndim - len(self._axes)]
        if self.order == 1:
            return reduced
        out = np.empty_like(reduced)
        for idx in np.ndindex(*lead):
            out[idx] = ndimage.spline_filter(
                reduced[idx], order=self.order, mode="grid-wrap"
            )
        return out

    def _coordinates(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if not np.all(np.isfinite(points)):
            raise NonFiniteFieldError("插值坐标含非有限值")
        flat = points.reshape(3, -1)
        coords = []
        for a in self._axes:
            length = self.grid.lengths[a]
            coords.append(np.mod(flat[a], length) / self.grid.spacing[a])
        return np.array(coords)

    def sample(
        self,
        values: np.ndarray,
        points: np.ndarray,
        coefficients: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """
        在任意点采样

        Args:
            values: 网格数组，形状 (*lead, nx, ny, nz)
            points: 坐标，形状 (3, *pshape)，可超出 [0, L)
            coefficients: prefilter 的结果，可缓存复用

        Returns:
            形状 (*lead, *pshape) 的数组
        """
        coeffs = self.prefilter(values) if coefficients is None else coefficients
        return self.evaluate(coeffs, points)

    def evaluate(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        """由样条系数直接求值"""
        coords = self._coordinates(points)
        pshape = np.shape(points)[1:]
        lead = coeffs.shape[: coeffs.ndim - len(self._axes)]
        out = np.empty(lead + (coords.shape[1],))
        for idx in np.ndindex(*lead):
            out[idx] = ndimage.map_coordinates(
                coeffs[idx],
                coords,
                order=self.order,
                mode="grid-wrap",
                prefilter=False,
            )
        return out.reshape(lead + tuple(pshape))


def interpolate(
    field: ScalarField, positions: np.ndarray, order: int = 3
) -> np.ndarray:
    """场在给定位置的插值，positions 形状 (3, ...)"""
    return PeriodicInterpolator(field.grid, order).sample(field.values, positions)
