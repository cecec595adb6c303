"""
Cheviakov 广义涡度守恒律
前提 ∇·N = 0，∂N/∂t + ∇×M = 0；守恒律 ∂t(N·∇F) + ∇·(M×∇F - F_t N) = 0
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from app.numerics.algebra import cross, dot, magnitude

from .force import frame_force
from .frame import Frame
from .report import ConservationReport, term_scale

Provider = Callable[[Frame], np.ndarray]


@dataclass
class CheviakovSystem:
    """
    N、M、F 及 F_t 的提供者

    N_t 与 grad_F_t 只在半离散模式下使用，缺省时退回快照差分。
    """

    name: str
    N: Provider
    M: Provider
    grad_F: Provider
    F_t: Provider
    N_t: Optional[Provider] = None
    grad_F_t: Optional[Provider] = None


def canonical_system(psi: str) -> CheviakovSystem:
    """N = ω，M = -u×ω - (T∇S + J×B/ρ)，F = ψ，F_t = -u·∇ψ"""
    return CheviakovSystem(
        name="canonical",
        N=lambda f: f.vorticity(),
        M=lambda f: -cross(f.state.u, f.vorticity()) - frame_force(f).nonpotential,
        grad_F=lambda f: f.label_grad(psi),
        F_t=lambda f: f.tendency.labels[psi],
        N_t=lambda f: f.vorticity_rate(),
        grad_F_t=lambda f: f.label_rate_grad(psi),
    )


def magnetic_system(psi: Optional[str] = None) -> CheviakovSystem:
    """N = B，M = -u×B；psi 为空时 F 取常数"""

    def zeros_scalar(f: Frame) -> np.ndarray:
        return np.zeros(f.grid.shape)

    def zeros_vector(f: Frame) -> np.ndarray:
        return np.zeros((3,) + f.grid.shape)

    return CheviakovSystem(
        name="magnetic",
        N=lambda f: f.state.B,
        M=lambda f: -cross(f.state.u, f.state.B),
        grad_F=(lambda f: f.label_grad(psi)) if psi else zeros_vector,
        F_t=(lambda f: f.tendency.labels[psi]) if psi else zeros_scalar,
        N_t=lambda f: f.tendency.B,
        grad_F_t=(lambda f: f.label_rate_grad(psi)) if psi else zeros_vector,
    )


def _semi_rate(system: CheviakovSystem, frame: Frame) -> np.ndarray:
    if system.N_t is None or system.grad_F_t is None:
        raise ValueError(f"系统 {system.name} 没有半离散时间导数，请使用快照模式")
    return dot(system.N_t(frame), system.grad_F(frame)) + dot(
        system.N(frame), system.grad_F_t(frame)
    )


def cheviakov_residual(frame: Frame, system: CheviakovSystem) -> ConservationReport:
    """
    Cheviakov 守恒律残差，同时报告两条前提的残差

    Returns:
        名称 eq1.5，variant 为系统名
    """
    N = system.N(frame)
    grad_F = system.grad_F(frame)
    density = dot(N, grad_F)
    flux = cross(system.M(frame), grad_F) - system.F_t(frame) * N
    rate = frame.rate(
        lambda f: dot(system.N(f), system.grad_F(f)), lambda f: _semi_rate(system, f)
    )
    divergence = frame.ops.div(flux)

    if frame.mode == "semi-discrete" and system.N_t is not None:
        N_t = system.N_t(frame)
    else:
        N_t = frame.rate(system.N, lambda f: system.N_t(f))
    evolution = N_t + frame.ops.curl(system.M(frame))
    premises = {
        "divN_linf": float(np.max(np.abs(frame.ops.div(N)))),
        "evolution_linf": float(np.max(magnitude(evolution))),
    }
    return ConservationReport(
        name="eq1.5",
        variant=system.name,
        mode=frame.mode,
        t=frame.t,
        grid=frame.grid,
        density=density,
        flux=flux,
        residual=rate + divergence,
        scale=term_scale(rate, divergence),
        premise_norms=premises,
    )
