"""
经典四级 Runge-Kutta 推进与 CFL 时间步
"""

import logging
import math
from typing import List, Optional

import numpy as np

from app.numerics import DiffOps
from app.numerics.algebra import norm2
from app.thermo import EquationOfState

from .rhs import mhd_rhs
from .state import MhdState, SolverAbort, Tendency

logger = logging.getLogger(__name__)


class RK4Stepper:
    """
    RK4 推进器

    每步之后保留四个级状态与对应倾向量，
    拉格朗日映射用它们做同步的耦合 RK4。
    """

    NODES = (0.0, 0.5, 0.5, 1.0)
    WEIGHTS = (1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0)

    def __init__(
        self,
        eos: EquationOfState,
        ops: DiffOps,
        growth_limit: float = 10.0,
        growth_floor: float = 1e-6,
    ):
        self.eos = eos
        self.ops = ops
        self.growth_limit = growth_limit
        self.growth_floor = growth_floor
        self.stages: List[MhdState] = []
        self.tendencies: List[Tendency] = []

    def step(self, state: MhdState, dt: float) -> MhdState:
        stages = [state]
        tendencies = [mhd_rhs(state, self.eos, self.ops)]
        for node in self.NODES[1:]:
            stage = state.advanced(tendencies[-1], node * dt)
            stage.validate()
            stages.append(stage)
            tendencies.append(mhd_rhs(stage, self.eos, self.ops))

        new_state = state.advanced(Tendency.combine(self.WEIGHTS, tendencies), dt)
        new_state.validate()
        self._check_growth(state, new_state)
        self.stages = stages
        self.tendencies = tendencies
        return new_state

    def _check_growth(self, old: MhdState, new: MhdState) -> None:
        """任一物理场 L∞ 单步增长超过 growth_limit 倍即中止 (被动标签不参与)"""
        before = old.linf()
        floor = self.growth_floor * max(max(before.values()), 1e-300)
        for name, value in new.linf().items():
            if name.startswith("label:"):
                continue
            reference = max(before.get(name, 0.0), floor)
            if value > self.growth_limit * reference:
                values = dict(new.arrays())[name]
                where = np.unravel_index(np.argmax(np.abs(values)), values.shape)
                raise SolverAbort(
                    f"检测到不稳定: 场 {name} 的 L∞ 由 {before.get(name, 0.0):.3e} "
                    f"增至 {value:.3e} (t={new.t:.6g})",
                    name,
                    tuple(int(i) for i in where),
                )


def rk4_step(
    state: MhdState, dt: float, eos: EquationOfState, ops: Optional[DiffOps] = None
) -> MhdState:
    """单步 RK4，返回新状态"""
    return RK4Stepper(eos, ops or DiffOps(state.grid)).step(state, dt)


def signal_speed(state: MhdState, eos: EquationOfState) -> np.ndarray:
    """|u| + c_fast，c_fast² = c_s² + v_A²"""
    cs2 = eos.sound_speed_squared(state.rho, state.S)
    va2 = norm2(state.B) / (eos.mu0 * state.rho)
    return np.sqrt(norm2(state.u)) + np.sqrt(cs2 + va2)


def stable_dt(state: MhdState, eos: EquationOfState, cfl: float = 0.3) -> float:
    """
    CFL 时间步 dt = cfl·h / max(|u| + c_fast)

    Returns:
        完全静止且无信号速度时返回 +inf，由调用方截断
    """
    if not 0 < cfl <= 1:
        raise ValueError(f"cfl 必须在 (0, 1] 内: {cfl}")
    speed = float(np.max(signal_speed(state, eos)))
    if speed <= 0:
        return math.inf
    return cfl * state.grid.min_spacing / speed


def fixed_step(t_end: float, dt_stable: float) -> float:
    """整段运行使用的等分步长 dt = t_end / ceil(t_end / dt_stable)"""
    if t_end <= 0:
        raise ValueError(f"t_end 必须为正: {t_end}")
    if not math.isfinite(dt_stable):
        return t_end
    return t_end / math.ceil(t_end / dt_stable - 1e-12)
