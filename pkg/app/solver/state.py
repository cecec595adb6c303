"""
MHD 状态与倾向量
状态是值对象：时间推进总是返回新状态
"""

from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from app.numerics import DiffOps, Grid, PeriodicInterpolator


class SolverAbort(RuntimeError):
    """求解器中止，携带出问题的场名与网格位置"""

    def __init__(self, message: str, field: str = "", location: Optional[Tuple] = None):
        super().__init__(message)
        self.field = field
        self.location = location


class UnknownLabelError(KeyError):
    """请求的标签标量不在状态中"""


@dataclass
class Label:
    """
    平流标签标量 ψ = k·x + ψ̃

    ψ̃ 为周期部分，k 为常梯度 (斜坡)。
    斜坡使叶状结构 (x0, y0 + ε sin x0, z0 + ε cos y0) 在 2.5D 网格上可表示。
    """

    periodic: np.ndarray
    ramp: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.periodic = np.asarray(self.periodic, dtype=float)
        self.ramp = np.asarray(self.ramp, dtype=float).reshape(3)

    def gradient(self, ops: DiffOps) -> np.ndarray:
        return self.ramp.reshape((3,) + (1,) * self.periodic.ndim) + ops.grad(
            self.periodic
        )

    def values(self, points: np.ndarray) -> np.ndarray:
        """网格节点上的完整值，points 为与 periodic 同形的坐标"""
        return np.tensordot(self.ramp, points, axes=1) + self.periodic

    def sample(
        self,
        interp: PeriodicInterpolator,
        points: np.ndarray,
        coefficients: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """沿未折返坐标采样，轨迹上的值连续"""
        return np.tensordot(self.ramp, points, axes=1) + interp.sample(
            self.periodic, points, coefficients
        )

    def copy(self) -> "Label":
        return Label(self.periodic.copy(), self.ramp.copy())


@dataclass
class Tendency:
    """每个预报场的时间导数"""

    rho: np.ndarray
    u: np.ndarray
    S: np.ndarray
    B: np.ndarray
    labels: Dict[str, np.ndarray] = field(default_factory=dict)
    A: Optional[np.ndarray] = None

    def arrays(self) -> Iterable[Tuple[str, np.ndarray]]:
        yield "rho", self.rho
        yield "u", self.u
        yield "S", self.S
        yield "B", self.B
        for name, values in self.labels.items():
            yield f"label:{name}", values
        if self.A is not None:
            yield "A", self.A

    def check_finite(self) -> None:
        for name, values in self.arrays():
            if not np.all(np.isfinite(values)):
                where = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
                raise SolverAbort(f"倾向量 {name} 出现非有限值", name, where)

    @staticmethod
    def combine(weights: Sequence[float], tendencies: Sequence["Tendency"]) -> "Tendency":
        """线性组合 Σ w_k T_k"""

        def mix(getter):
            return sum(w * getter(t) for w, t in zip(weights, tendencies))

        first = tendencies[0]
        return Tendency(
            rho=mix(lambda t: t.rho),
            u=mix(lambda t: t.u),
            S=mix(lambda t: t.S),
            B=mix(lambda t: t.B),
            labels={k: mix(lambda t, k=k: t.labels[k]) for k in first.labels},
            A=None if first.A is None else mix(lambda t: t.A),
        )


@dataclass
class MhdState:
    """
    欧拉场 (ρ, u, S, B)、平流标签、可选矢势 A 与静态引力势 Φ

    B 与 A 的关系为 B = B_mean + ∇×A (仅在携带 A 时使用)。
    """

    grid: Grid
    rho: np.ndarray
    u: np.ndarray
    S: np.ndarray
    B: np.ndarray
    labels: Dict[str, Label] = field(default_factory=dict)
    A: Optional[np.ndarray] = None
    Phi: Optional[np.ndarray] = None
    t: float = 0.0

    def label(self, name: str) -> Label:
        try:
            return self.labels[name]
        except KeyError:
            raise UnknownLabelError(
                f"未知标签 {name!r}，可用: {sorted(self.labels)}"
            ) from None

    def arrays(self) -> Iterable[Tuple[str, np.ndarray]]:
        yield "rho", self.rho
        yield "u", self.u
        yield "S", self.S
        yield "B", self.B
        for name, lab in self.labels.items():
            yield f"label:{name}", lab.periodic
        if self.A is not None:
            yield "A", self.A

    def validate(self) -> bool:
        """密度为正且所有场有限，否则以 SolverAbort 报告位置"""
        for name, values in self.arrays():
            if not np.all(np.isfinite(values)):
                where = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
                raise SolverAbort(f"场 {name} 在 t={self.t:.6g} 出现非有限值", name, where)
        if np.any(self.rho <= 0):
            where = tuple(int(i) for i in np.argwhere(self.rho <= 0)[0])
            raise SolverAbort(
                f"密度非正: ρ={self.rho[where]:.3e}，位置 {where}，t={self.t:.6g}",
                "rho",
                where,
            )
        return True

    def advanced(self, tendency: Tendency, dt: float) -> "MhdState":
        """返回 state + dt·tendency，时间前进 dt"""
        return replace(
            self,
            rho=self.rho + dt * tendency.rho,
            u=self.u + dt * tendency.u,
            S=self.S + dt * tendency.S,
            B=self.B + dt * tendency.B,
            labels={
                k: Label(v.periodic + dt * tendency.labels[k], v.ramp)
                for k, v in self.labels.items()
            },
            A=None if self.A is None else self.A + dt * tendency.A,
            t=self.t + dt,
        )

    def copy(self) -> "MhdState":
        return replace(
            self,
            rho=self.rho.copy(),
            u=self.u.copy(),
            S=self.S.copy(),
            B=self.B.copy(),
            labels={k: v.copy() for k, v in self.labels.items()},
            A=None if self.A is None else self.A.copy(),
            Phi=None if self.Phi is None else self.Phi.copy(),
        )

    def linf(self) -> Dict[str, float]:
        return {name: float(np.max(np.abs(v))) for name, v in self.arrays()}

    def scale(self) -> float:
        return max(self.linf().values())

