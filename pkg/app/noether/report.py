"""
守恒律报告
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from app.numerics import Grid


def field_norms(residual: np.ndarray, weight: float) -> Dict[str, float]:
    """
    L2 = sqrt(Σ|r|² w)，L∞ = max|r|

    矢量残差 (首轴长度 3 且比网格多一维) 逐点取模
    """
    r = np.asarray(residual, dtype=float)
    if r.size == 0:
        return {"L2": 0.0, "Linf": 0.0}
    squared = r**2
    if r.ndim in (2, 4) and r.shape[0] == 3:
        squared = np.sum(squared, axis=0)
    return {
        "L2": float(np.sqrt(np.sum(squared) * weight)),
        "Linf": float(np.sqrt(np.max(squared))),
    }


def term_scale(*terms: np.ndarray) -> float:
    """残差的量级基准: 各组成项 L∞ 的最大值"""
    values = [float(np.max(np.abs(t))) for t in terms if t is not None and np.size(t)]
    return max(values) if values else 0.0


@dataclass
class ConservationReport:
    """
    某一恒等式在一个时刻、一个分辨率上的离散残差

    name 使用方程标签 (eq1.3、nfa17 ...)，residual 为 ∂t 密度 + ∇·通量 或逐点差。
    """

    name: str
    residual: np.ndarray
    grid: Grid
    t: float
    mode: str = "semi-discrete"
    variant: str = ""
    density: Optional[np.ndarray] = None
    flux: Optional[np.ndarray] = None
    scale: float = 0.0
    premise_norms: Dict[str, float] = field(default_factory=dict)
    side: Optional[str] = None
    extra: Dict[str, Any] = field(default_factory=dict)
    weight: Optional[float] = None
    norms: Dict[str, float] = field(init=False)

    def __post_init__(self):
        if self.weight is None:
            self.weight = self.grid.cell_volume
        self.norms = field_norms(self.residual, self.weight)

    @property
    def key(self) -> str:
        parts = [self.name]
        if self.variant:
            parts.append(self.variant)
        if self.side:
            parts.append(self.side)
        return ":".join(parts)

    @property
    def relative(self) -> float:
        """L∞ / 组成项量级，量级为 0 时退化为绝对值"""
        return self.norms["Linf"] / self.scale if self.scale > 0 else self.norms["Linf"]

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "name": self.name,
            "variant": self.variant,
            "mode": self.mode,
            "t": float(self.t),
            "grid": self.grid.describe(),
            "norms": dict(self.norms),
            "scale": float(self.scale),
        }
        if self.premise_norms:
            payload["premise_norms"] = dict(self.premise_norms)
        if self.side:
            payload["side"] = self.side
        if self.extra:
            payload["extra"] = dict(self.extra)
        return payload
