"""
广义力 F = T∇S + ∇(½u² - h) + J×B/ρ
"""

from dataclasses import dataclass

import numpy as np

from app.numerics import DiffOps
from app.numerics.algebra import cross, norm2
from app.solver import MhdState
from app.thermo import EquationOfState


@dataclass
class ForceField:
    thermal: np.ndarray
    gradient: np.ndarray
    lorentz: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.thermal + self.gradient + self.lorentz

    @property
    def nonpotential(self) -> np.ndarray:
        """T∇S + J×B/ρ，与 total 只差一个梯度"""
        return self.thermal + self.lorentz


def force_F(
    state: MhdState,
    eos: EquationOfState,
    ops: DiffOps = None,
    lorentz_sign: float = 1.0,
) -> ForceField:
    """
    分量分别保留的广义力

    Args:
        lorentz_sign: 洛伦兹项符号，仅用于变异对照 (正常为 1)
    """
    ops = ops or DiffOps(state.grid)
    thermo = eos.evaluate(state.rho, state.S)
    current = ops.curl(state.B) / eos.mu0
    return ForceField(
        thermal=thermo.T * ops.grad(state.S),
        gradient=ops.grad(0.5 * norm2(state.u) - thermo.h),
        lorentz=lorentz_sign * cross(current, state.B) / state.rho,
    )


def frame_force(frame) -> ForceField:
    return frame.cached(
        "force", lambda: force_F(frame.state, frame.eos, frame.ops, frame.lorentz_sign)
    )
