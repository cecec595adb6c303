"""
拉格朗日映射 x = X(x0, t)
标签网格即初始欧拉网格；位置以未折返的位移保存，F 由自身的常微分方程推进
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Protocol, Tuple

import numpy as np

from app.numerics import DiffOps, Grid, PeriodicInterpolator
from app.numerics.algebra import determinant, identity, matmul
from app.solver import Label, MhdState, Tendency, material_acceleration

logger = logging.getLogger(__name__)


class MapFoldingError(RuntimeError):
    """映射折叠 (J ≤ 0)"""

    def __init__(self, message: str, location: Optional[Tuple] = None):
        super().__init__(message)
        self.location = location


class DesynchronizedError(RuntimeError):
    """映射与欧拉状态不在同一时刻"""


class InsufficientHistoryError(RuntimeError):
    """缺少所需的时间层或示踪点速度/加速度"""


@dataclass
class LagrangianMap:
    """
    示踪点集合，每个标签网格点一个示踪点

    u / grad_u / accel 为与欧拉状态同步后的示踪点速度、速度梯度与物质加速度。
    """

    grid: Grid
    x0: np.ndarray
    displacement: np.ndarray
    F: np.ndarray
    rho0: np.ndarray
    S0: np.ndarray
    B0: np.ndarray
    labels0: Dict[str, Label] = field(default_factory=dict)
    t: float = 0.0
    u: Optional[np.ndarray] = None
    grad_u: Optional[np.ndarray] = None
    accel: Optional[np.ndarray] = None

    @classmethod
    def from_state(cls, state: MhdState) -> "LagrangianMap":
        """t0 时刻的恒等映射，初始标签数据取自状态"""
        grid = state.grid
        return cls(
            grid=grid,
            x0=grid.coords(),
            displacement=grid.zeros(3),
            F=identity(grid.shape),
            rho0=state.rho.copy(),
            S0=state.S.copy(),
            B0=state.B.copy(),
            labels0={k: v.copy() for k, v in state.labels.items()},
            t=state.t,
        )

    @property
    def positions(self) -> np.ndarray:
        """未折返坐标 x0 + 位移"""
        return self.x0 + self.displacement

    @property
    def x(self) -> np.ndarray:
        """折返到 [0, L) 的坐标"""
        lengths = np.array(self.grid.lengths).reshape(3, 1, 1, 1)
        return np.mod(self.positions, lengths)

    def require_sync(self) -> None:
        if self.u is None or self.grad_u is None or self.accel is None:
            raise InsufficientHistoryError("映射尚未与欧拉状态同步 (缺少示踪点速度/加速度)")


class VelocitySampler(Protocol):
    """在 RK4 第 stage 级给出任意点的 u 与 ∇u"""

    def sample(self, points: np.ndarray, stage: int) -> Tuple[np.ndarray, np.ndarray]:
        ...


class FieldSampler:
    """从求解器的级状态插值速度与速度梯度"""

    def __init__(self, stages: List[MhdState], ops: DiffOps, interp: PeriodicInterpolator):
        if len(stages) != 4:
            raise InsufficientHistoryError(f"需要 4 个 RK4 级状态，收到 {len(stages)}")
        self.stages = stages
        self.ops = ops
        self.interp = interp
        self._coefficients: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    def _coeffs(self, stage: int) -> Tuple[np.ndarray, np.ndarray]:
        if stage not in self._coefficients:
            u = self.stages[stage].u
            self._coefficients[stage] = (
                self.interp.prefilter(u),
                self.interp.prefilter(self.ops.jacobian(u)),
            )
        return self._coefficients[stage]

    def sample(self, points: np.ndarray, stage: int) -> Tuple[np.ndarray, np.ndarray]:
        cu, cg = self._coeffs(stage)
        return self.interp.evaluate(cu, points), self.interp.evaluate(cg, points)


class AnalyticSampler:
    """解析速度场，级时间为 t0 + c_k·dt"""

    def __init__(
        self,
        velocity: Callable[[np.ndarray, float], np.ndarray],
        gradient: Callable[[np.ndarray, float], np.ndarray],
        t0: float,
        dt: float,
    ):
        self.velocity = velocity
        self.gradient = gradient
        self.times = [t0 + c * dt for c in (0.0, 0.5, 0.5, 1.0)]

    def sample(self, points: np.ndarray, stage: int) -> Tuple[np.ndarray, np.ndarray]:
        t = self.times[stage]
        return self.velocity(points, t), self.gradient(points, t)


def advance_map(
    lmap: LagrangianMap, sampler: VelocitySampler, dt: float
) -> LagrangianMap:
    """
    耦合 RK4 推进 dx/dt = u(x, t)，dF/dt = ∇u(x, t)·F

    Args:
        lmap: 当前映射
        sampler: 与欧拉步同步的速度采样器
        dt: 与求解器一致的时间步

    Returns:
        新映射 (未同步速度)
    """
    nodes = (0.0, 0.5, 0.5, 1.0)
    weights = (1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0)
    position = lmap.positions
    kx, kf = None, None
    dx = np.zeros_like(position)
    dF = np.zeros_like(lmap.F)
    for stage, (node, weight) in enumerate(zip(nodes, weights)):
        if stage == 0:
            pos_s, F_s = position, lmap.F
        else:
            pos_s = position + node * dt * kx
            F_s = lmap.F + node * dt * kf
        u, grad_u = sampler.sample(pos_s, stage)
        kx = u
        kf = matmul(grad_u, F_s)
        dx += weight * kx
        dF += weight * kf

    new_map = replace(
        lmap,
        displacement=lmap.displacement + dt * dx,
        F=lmap.F + dt * dF,
        t=lmap.t + dt,
        u=None,
        grad_u=None,
        accel=None,
    )
    J = determinant(new_map.F)
    if np.any(J <= 0):
        where = tuple(int(i) for i in np.unravel_index(np.argmin(J), J.shape))
        raise MapFoldingError(
            f"映射折叠: min J = {J[where]:.3e}，标签位置 {where}，t={new_map.t:.6g}",
            where,
        )
    return new_map


def sync_map(
    lmap: LagrangianMap,
    state: MhdState,
    tendency: Tendency,
    ops: DiffOps,
    interp: PeriodicInterpolator,
    tolerance: float = 1e-10,
) -> LagrangianMap:
    """把欧拉速度、速度梯度与物质加速度插值到示踪点"""
    if abs(lmap.t - state.t) > tolerance * max(1.0, abs(state.t)):
        raise DesynchronizedError(f"映射时刻 {lmap.t:.12g} 与状态时刻 {state.t:.12g} 不一致")
    points = lmap.positions
    return replace(
        lmap,
        u=interp.sample(state.u, points),
        grad_u=interp.sample(ops.jacobian(state.u), points),
        accel=interp.sample(material_acceleration(state, tendency, ops), points),
    )
