"""
残差求值上下文
一个 Frame 是某时刻的 (状态, 倾向量, 映射)，附带相邻时刻用于快照模式的时间差分
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np

from app.lagrange import (
    InsufficientHistoryError,
    LagrangianMap,
    MapGeometry,
    euler_lagrange_residual,
    map_geometry,
)
from app.numerics import DiffOps, Grid, PeriodicInterpolator
from app.solver import MhdState, Tendency
from app.thermo import EquationOfState, ThermoState

MODES = ("semi-discrete", "snapshot")


@dataclass(eq=False)
class Frame:
    state: MhdState
    tendency: Tendency
    eos: EquationOfState
    ops: DiffOps
    interp: Optional[PeriodicInterpolator] = None
    map: Optional[LagrangianMap] = None
    previous: Optional["Frame"] = None
    following: Optional["Frame"] = None
    mode: str = "semi-discrete"
    lorentz_sign: float = 1.0
    curl_term: bool = False
    _cache: Dict[str, Any] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"未知残差模式 {self.mode!r}，可选: {MODES}")

    @property
    def grid(self) -> Grid:
        return self.state.grid

    @property
    def t(self) -> float:
        return self.state.t

    def cached(self, key: str, fn: Callable[[], Any]) -> Any:
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def thermo(self) -> ThermoState:
        return self.cached("thermo", lambda: self.eos.evaluate(self.state.rho, self.state.S))

    def vorticity(self) -> np.ndarray:
        return self.cached("omega", lambda: self.ops.curl(self.state.u))

    def vorticity_rate(self) -> np.ndarray:
        """∂ω/∂t = ∇×(∂u/∂t)"""
        return self.cached("omega_t", lambda: self.ops.curl(self.tendency.u))

    def label_grad(self, name: str) -> np.ndarray:
        return self.cached(f"grad:{name}", lambda: self.state.label(name).gradient(self.ops))

    def label_rate_grad(self, name: str) -> np.ndarray:
        """∂(∇ψ)/∂t = ∇(∂ψ/∂t)"""
        self.state.label(name)
        return self.cached(f"grad_t:{name}", lambda: self.ops.grad(self.tendency.labels[name]))

    def geometry(self) -> MapGeometry:
        if self.map is None:
            raise InsufficientHistoryError("该运行没有携带拉格朗日映射")
        return self.cached("geometry", lambda: map_geometry(self.map))

    def require_map(self) -> LagrangianMap:
        if self.map is None:
            raise InsufficientHistoryError("该运行没有携带拉格朗日映射")
        self.map.require_sync()
        return self.map

    def euler_lagrange(self) -> np.ndarray:
        """标签网格上实测的 E_x(ℓ0)，标签差分沿用欧拉网格算子"""

        def compute():
            lmap = self.require_map()
            grad_phi = None
            if self.state.Phi is not None:
                grad_phi = self.interp.sample(self.ops.grad(self.state.Phi), lmap.positions)
            return euler_lagrange_residual(lmap, self.geometry(), self.eos, self.ops, grad_phi)

        return self.cached("euler_lagrange", compute)

    def rate(
        self,
        density: Callable[["Frame"], np.ndarray],
        semi_discrete: Callable[["Frame"], np.ndarray],
    ) -> np.ndarray:
        """
        密度的时间导数

        半离散模式按乘积法则用右端倾向量组装；快照模式对相邻时刻做中心差分
        """
        if self.mode == "semi-discrete":
            return semi_discrete(self)
        if self.previous is None or self.following is None:
            raise InsufficientHistoryError(f"快照模式需要 t={self.t:.6g} 前后各一个时刻")
        span = self.following.t - self.previous.t
        return (density(self.following) - density(self.previous)) / span
