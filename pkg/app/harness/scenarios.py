"""
初值预设
每个预设由 BaseScenario 子类实现，并在 SCENARIOS 中按名称注册
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Type

import numpy as np

from app.numerics import DiffOps, Grid
from app.relabel import (
    FOLIATION_PRESETS,
    EntropyClosure,
    Foliation,
    foliation_build,
    potential_curl,
)
from app.solver import Label, MhdState
from app.thermo import PolytropicEos

from .config import ConfigError, RunConfig

logger = logging.getLogger(__name__)


@dataclass
class ScenarioSetup:
    state: MhdState
    foliation: Optional[Foliation] = None
    # 位势涡度默认使用的标签
    psi: str = "psi"
    # 无叶状结构时构造生成元所用的 (ψ, χ) 标签
    generator_labels: Optional[Tuple[str, str]] = None


class BaseScenario(ABC):
    """初值预设基类"""

    NAME: str = ""
    # scenario.foliation = auto 时使用的叶状结构
    DEFAULT_FOLIATION: str = "none"

    def __init__(self, config: RunConfig):
        self.config = config
        self.options = config.scenario

    @property
    def foliation_kind(self) -> str:
        kind = self.options.foliation
        return self.DEFAULT_FOLIATION if kind == "auto" else kind

    @abstractmethod
    def build(self, grid: Grid, eos: PolytropicEos) -> ScenarioSetup:
        """在给定网格上构造 t=0 状态"""

    def analytic_error(self, state: MhdState, eos: PolytropicEos) -> Optional[Dict[str, float]]:
        """有解析解的预设返回误差范数，否则返回 None"""
        return None

    def _select_labels(self, available: Dict[str, Label]) -> Dict[str, Label]:
        wanted = self.options.labels or list(available)
        missing = [name for name in wanted if name not in available]
        if missing:
            raise ConfigError(
                f"场景 {self.NAME} 不提供标签 {missing}，可用: {sorted(available)}"
            )
        return {name: available[name] for name in wanted}

    def _build_foliation(self, grid: Grid, entropy: EntropyClosure) -> Optional[Foliation]:
        kind = self.foliation_kind
        if kind == "none":
            return None
        if kind not in FOLIATION_PRESETS:
            raise ConfigError(
                f"未知叶状结构 {kind!r}，可选: {sorted(FOLIATION_PRESETS) + ['none']}"
            )
        potentials = FOLIATION_PRESETS[kind](self.options.foliation_amplitude)
        try:
            return foliation_build(
                potentials["phi"], potentials["chi"], potentials["psi"], entropy, grid
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e

    @staticmethod
    def _check_2p5d(grid: Grid, name: str) -> None:
        if grid.nz != 1:
            raise ConfigError(f"场景 {name} 为 2.5D 预设，需要 grid.nz = 1")


def _orszag_tang_velocity(coords: np.ndarray) -> np.ndarray:
    x, y = coords[0], coords[1]
    return np.stack([-np.sin(y), np.sin(x), 0.2 * np.sin(x + y)])


class UniformScenario(BaseScenario):
    """静止均匀平衡态，B = ŷ 与笛卡尔叶状结构一致"""

    NAME = "uniform"
    DEFAULT_FOLIATION = "cartesian"

    def build(self, grid: Grid, eos: PolytropicEos) -> ScenarioSetup:
        closure = EntropyClosure("uniform", s0=eos.entropy_for(1.0, 1.0).item())
        foliation = self._build_foliation(grid, closure)
        labels = foliation.labels() if foliation is not None else {}
        labels["psi"] = labels.get("psi", Label(np.zeros(grid.shape), (0.0, 0.0, 1.0)))
        B = grid.zeros(3)
        if self.options.magnetic:
            B[1] = 1.0
        state = MhdState(
            grid=grid,
            rho=np.ones(grid.shape),
            u=grid.zeros(3),
            S=np.full(grid.shape, closure.s0),
            B=B,
            labels=self._select_labels(labels),
        )
        return ScenarioSetup(state, foliation)


class AdvectionScenario(BaseScenario):
    """u = (1, 0, 0)，B = 0，ψ = sin x 被平移"""

    NAME = "advection"

    def build(self, grid: Grid, eos: PolytropicEos) -> ScenarioSetup:
        coords = grid.coords()
        u = grid.zeros(3)
        u[0] = 1.0
        labels = {"psi": Label(np.sin(coords[0]))}
        state = MhdState(
            grid=grid,
            rho=np.ones(grid.shape),
            u=u,
            S=np.full(grid.shape, eos.entropy_for(1.0, 1.0).item()),
            B=grid.zeros(3),
            labels=self._select_labels(labels),
        )
        return ScenarioSetup(state)

    def analytic_error(self, state: MhdState, eos: PolytropicEos) -> Optional[Dict[str, float]]:
        if "psi" not in state.labels:
            return None
        coords = state.grid.coords()
        exact = np.sin(coords[0] - state.t)
        error = state.labels["psi"].periodic - exact
        return {
            "label_error_linf": float(np.max(np.abs(error))),
            "label_error_l2": float(np.sqrt(np.sum(error**2) * state.grid.cell_volume)),
        }


class ShearAlfvenScenario(BaseScenario):
    """
    圆偏振 Alfvén 波 (非线性精确解)

    B = (1, a cos x, a sin x)，u = -(0, a cos x, a sin x)，ρ = 1，p = 1，以 v_A = 1 沿 +x 传播
    """

    NAME = "shear-alfven"

    def _fields(self, coords: np.ndarray, t: float):
        a = self.options.velocity_amplitude
        phase = coords[0] - t
        B = np.stack([np.ones_like(phase), a * np.cos(phase), a * np.sin(phase)])
        u = -np.stack([np.zeros_like(phase), a * np.cos(phase), a * np.sin(phase)])
        return u, B

    def build(self, grid: Grid, eos: PolytropicEos) -> ScenarioSetup:
        if eos.mu0 != 1.0:
            raise ConfigError("shear-alfven 预设要求 eos.mu0 = 1")
        coords = grid.coords()
        u, B = self._fields(coords, 0.0)
        labels = {"psi": Label(np.sin(coords[1]))}
        state = MhdState(
            grid=grid,
            rho=np.ones(grid.shape),
            u=u,
            S=np.full(grid.shape, eos.entropy_for(1.0, 1.0).item()),
            B=B,
            labels=self._select_labels(labels),
        )
        return ScenarioSetup(state)

    def analytic_error(self, state: MhdState, eos: PolytropicEos) -> Optional[Dict[str, float]]:
        u, B = self._fields(state.grid.coords(), state.t)
        return {
            "u_error_linf": float(np.max(np.abs(state.u - u))),
            "B_error_linf": float(np.max(np.abs(state.B - B))),
        }


class OrszagTangScenario(BaseScenario):
    """
    2.5D Orszag-Tang 参考算例

    ρ = γ²，p = γ，u = (-sin y, sin x, 0.2 sin(x+y))，B = (-sin y, sin 2x, 0.2 cos(x+y))；
    ertel 变体取 B = 0，S 加扰动 a·sin x·cos y，并携带标签 s = S；
    foliation = labels 时不构造叶状结构，生成元直接由平流标签 ψ, χ 给出
    """

    NAME = "orszag-tang-25d"

    def build(self, grid: Grid, eos: PolytropicEos) -> ScenarioSetup:
        self._check_2p5d(grid, self.NAME)
        coords = grid.coords()
        x, y = coords[0], coords[1]
        gamma = eos.gamma
        rho = np.full(grid.shape, gamma**2)
        S = eos.entropy_for(rho, np.full(grid.shape, gamma))
        magnetic = self.options.magnetic and not self.options.ertel

        B = grid.zeros(3)
        A = None
        if magnetic:
            B = np.stack([-np.sin(y), np.sin(2 * x), 0.2 * np.cos(x + y)])
        if self.options.vector_potential:
            A = grid.zeros(3)
            if magnetic:
                A = np.stack([np.zeros_like(x), 0.2 * np.sin(x + y), np.cos(y) + 0.5 * np.cos(2 * x)])

        labels = {
            "psi": Label(np.sin(x) * np.sin(y)),
            "chi": Label(np.cos(x) * np.sin(y)),
            "phi": Label(np.sin(x) * np.cos(y)),
        }
        psi = "psi"
        if self.options.ertel:
            S = S + self.options.entropy_amplitude * np.sin(x) * np.cos(y)
            labels["s"] = Label(S.copy())
            psi = "s"

        state = MhdState(
            grid=grid,
            rho=rho,
            u=_orszag_tang_velocity(coords),
            S=S,
            B=B,
            labels=self._select_labels(labels),
            A=A,
        )
        kind = self.foliation_kind
        if kind == "labels":
            missing = [name for name in ("psi", "chi") if name not in state.labels]
            if missing:
                raise ConfigError(f"scenario.foliation = labels 需要携带标签 {missing}")
            return ScenarioSetup(state, None, psi, generator_labels=("psi", "chi"))
        if kind != "none":
            raise ConfigError(
                "orszag-tang-25d 的标签在 2.5D 下退化，不能构造叶状结构；"
                "只需生成元时使用 scenario.foliation = labels"
            )
        return ScenarioSetup(state, None, psi)


class CustomClosuresScenario(BaseScenario):
    """
    叶状结构一致的初值

    ρ = det(∇φ, ∇χ, ∇ψ)，B = ∇ψ×∇φ (离散旋度形式)，S = S(χ, ψ)，
    u = a·(-sin y, sin x, 0.2 sin(x+y))
    """

    NAME = "custom-closures"
    DEFAULT_FOLIATION = "curved"

    def build(self, grid: Grid, eos: PolytropicEos) -> ScenarioSetup:
        if self.foliation_kind == "none":
            raise ConfigError("custom-closures 需要叶状结构 (cartesian 或 curved)")
        try:
            closure = EntropyClosure(
                self.options.entropy_closure,
                s0=eos.entropy_for(1.0, 1.0).item(),
                amplitude=self.options.entropy_amplitude,
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e
        foliation = self._build_foliation(grid, closure)
        labels = foliation.labels()
        ops = DiffOps(grid)
        B = grid.zeros(3)
        A = None
        if self.options.magnetic:
            mean, potential, B = potential_curl(labels["psi"], labels["phi"], ops)
            if self.options.vector_potential:
                if np.any(mean):
                    raise ConfigError("携带矢势要求平均磁场为零，当前叶状结构的 B 均值非零")
                A = potential
        elif self.options.vector_potential:
            A = grid.zeros(3)

        state = MhdState(
            grid=grid,
            rho=foliation.rho0.copy(),
            u=self.options.velocity_amplitude * _orszag_tang_velocity(grid.coords()),
            S=foliation.S0.copy(),
            B=B,
            labels=self._select_labels(labels),
            A=A,
        )
        return ScenarioSetup(state, foliation)


SCENARIOS: Dict[str, Type[BaseScenario]] = {
    cls.NAME: cls
    for cls in (
        UniformScenario,
        AdvectionScenario,
        ShearAlfvenScenario,
        OrszagTangScenario,
        CustomClosuresScenario,
    )
}


def get_scenario(config: RunConfig) -> BaseScenario:
    name = config.scenario.name
    if name not in SCENARIOS:
        raise ConfigError(f"未知场景 {name!r}，可选: {sorted(SCENARIOS)}")
    return SCENARIOS[name](config)


def build_scenario(config: RunConfig) -> ScenarioSetup:
    """按配置构造初值并做一次合法性检查"""
    scenario = get_scenario(config)
    setup = scenario.build(config.grid.to_grid(), config.eos.to_eos())
    setup.state.validate()
    if config.reports.psi:
        setup.psi = config.reports.psi
    logger.info(
        "scenario %s: grid=%s labels=%s foliation=%s",
        scenario.NAME,
        setup.state.grid.describe(),
        sorted(setup.state.labels),
        scenario.foliation_kind,
    )
    return setup
