"""
重标记对称生成元
标签侧 V^{x0} = ∇0χ×∇0ψ/ρ0，欧拉侧 V̂ = ∇ψ×∇χ/ρ (由平流标签求值，任意时刻可用)
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from app.lagrange import LagrangianMap
from app.noether import ConservationReport, Frame, gauge_transform, term_scale
from app.numerics.algebra import cross, matvec
from app.solver import MhdState

from .foliation import Foliation

logger = logging.getLogger(__name__)


class GeneratorMismatchError(ValueError):
    """生成元引用的标签不在状态或映射中"""


@dataclass
class SymmetryGenerator:
    """
    由叶状结构 (χ, ψ) 构造的非场向生成元

    perturbation 为叠加在 V̂ 上的常矢量，仅用于变异对照；
    gauge0 为四分量标签规范场 (缺省为零)。
    """

    psi: str = "psi"
    chi: str = "chi"
    perturbation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gauge0: Optional[np.ndarray] = None
    foliation: Optional[Foliation] = None

    def __post_init__(self):
        self.perturbation = np.asarray(self.perturbation, dtype=float).reshape(3)

    @classmethod
    def from_foliation(
        cls, foliation: Foliation, psi: str = "psi", chi: str = "chi"
    ) -> "SymmetryGenerator":
        return cls(psi=psi, chi=chi, foliation=foliation)

    def perturbed(self, epsilon: float, direction=(1.0, 0.0, 0.0)) -> "SymmetryGenerator":
        """V̂ + ε·direction"""
        return replace(
            self, perturbation=self.perturbation + epsilon * np.asarray(direction, dtype=float)
        )

    @property
    def _key(self) -> str:
        return f"generator:{self.psi}:{self.chi}:{tuple(self.perturbation)}"

    def check_labels(self, state: MhdState, lmap: Optional[LagrangianMap] = None) -> None:
        missing = [n for n in (self.psi, self.chi) if n not in state.labels]
        if lmap is not None:
            missing += [n for n in (self.psi, self.chi) if n not in lmap.labels0]
        if missing:
            raise GeneratorMismatchError(
                f"生成元需要标签 {sorted(set(missing))}，状态携带: {sorted(state.labels)}"
            )

    def _frame_check(self, frame: Frame) -> None:
        frame.cached(f"{self._key}:checked", lambda: self.check_labels(frame.state, frame.map))

    # 标签侧

    def label_cross(self, frame: Frame) -> np.ndarray:
        """a = ∇0ψ×∇0χ = -ρ0 V^{x0}，标签差分作用于初始标签"""
        self._frame_check(frame)
        lmap = frame.require_map()

        def compute():
            grad_psi = lmap.labels0[self.psi].gradient(frame.ops)
            grad_chi = lmap.labels0[self.chi].gradient(frame.ops)
            return cross(grad_psi, grad_chi)

        return frame.cached(f"{self._key}:label_cross", compute)

    def label_vector(self, frame: Frame) -> np.ndarray:
        """V^{x0}"""
        return -self.label_cross(frame) / frame.require_map().rho0

    def pushforward(self, frame: Frame) -> np.ndarray:
        """示踪点处的 -F·V^{x0}"""
        return -matvec(frame.require_map().F, self.label_vector(frame))

    # 欧拉侧

    def momentum_weight(self, frame: Frame) -> np.ndarray:
        """ρV̂ = ∇ψ×∇χ + ρε"""
        self._frame_check(frame)

        def compute():
            weight = cross(frame.label_grad(self.psi), frame.label_grad(self.chi))
            if np.any(self.perturbation):
                weight = weight + frame.state.rho * self.perturbation.reshape(3, 1, 1, 1)
            return weight

        return frame.cached(f"{self._key}:weight", compute)

    def momentum_weight_rate(self, frame: Frame) -> np.ndarray:
        """半离散 ∂t(ρV̂) = ∇ψ_t×∇χ + ∇ψ×∇χ_t + ρ_t ε"""
        rate = cross(frame.label_rate_grad(self.psi), frame.label_grad(self.chi)) + cross(
            frame.label_grad(self.psi), frame.label_rate_grad(self.chi)
        )
        if np.any(self.perturbation):
            rate = rate + frame.tendency.rho * self.perturbation.reshape(3, 1, 1, 1)
        return rate

    def eulerian(self, frame: Frame) -> np.ndarray:
        """V̂ = ρV̂/ρ"""
        return frame.cached(
            f"{self._key}:eulerian", lambda: self.momentum_weight(frame) / frame.state.rho
        )

    def eulerian_rate(self, frame: Frame) -> np.ndarray:
        """∂V̂/∂t，半离散时为 (∂t(ρV̂) - V̂ ρ_t)/ρ"""

        def semi(f: Frame) -> np.ndarray:
            return (
                self.momentum_weight_rate(f) - self.eulerian(f) * f.tendency.rho
            ) / f.state.rho

        return frame.cached(
            f"{self._key}:eulerian_rate", lambda: frame.rate(self.eulerian, semi)
        )

    def gauge(self, frame: Frame) -> np.ndarray:
        """示踪点处的欧拉规范场 Λ，缺省 Λ0 = 0"""
        lmap = frame.require_map()
        gauge0 = self.gauge0 if self.gauge0 is not None else np.zeros((4,) + frame.grid.shape)
        return gauge_transform(gauge0, lmap, frame.geometry().J)


def generator_consistency(frame: Frame, generator: SymmetryGenerator) -> ConservationReport:
    """
    前推 -F·V^{x0} 与由平流标签求得的 V̂ 在示踪点处之差

    Returns:
        名称 eq4.32 的逐点差报告
    """
    lmap = frame.require_map()
    pushed = generator.pushforward(frame)
    sampled = frame.interp.sample(generator.eulerian(frame), lmap.positions)
    return ConservationReport(
        name="eq4.32",
        mode=frame.mode,
        t=frame.t,
        grid=frame.grid,
        residual=pushed - sampled,
        scale=term_scale(pushed, sampled),
        side="label",
    )
