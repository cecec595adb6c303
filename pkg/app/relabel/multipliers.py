"""
拉格朗日乘子与 Bianchi 恒等式的乘子形式
标签组 ν1..ν4 位于示踪点，欧拉组 μ1..μ4 位于欧拉网格
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from app.lagrange import DesynchronizedError, map_reconstruct
from app.noether import ConservationReport, Frame, frame_force, term_scale
from app.numerics.algebra import axial, dot, matmul, norm2, transpose, vecmat

logger = logging.getLogger(__name__)


@dataclass
class Multipliers:
    nu1: np.ndarray
    nu2: np.ndarray
    nu3: np.ndarray
    nu4: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    mu3: np.ndarray
    mu4: np.ndarray
    Q_chain: np.ndarray
    Q_direct: np.ndarray
    G: np.ndarray

    @property
    def q_mismatch(self) -> float:
        return float(np.max(np.abs(self.Q_chain - self.Q_direct)))


def _check_sync(frame: Frame) -> None:
    lmap = frame.require_map()
    if abs(lmap.t - frame.t) > 1e-10 * max(1.0, abs(frame.t)):
        raise DesynchronizedError(f"映射时刻 {lmap.t:.12g} 与状态时刻 {frame.t:.12g} 不一致")


def multipliers_eval(frame: Frame, psi: str = "psi") -> Multipliers:
    """
    计算两组乘子与辅助量 Q、G

    ν1 = ½u² - h，ν2 = -ρ0T，ν3 = FᵀB/μ0，ν4 = -Fᵀu
    Q_chain  = -J (ω·∇ψ) (欧拉量插值到示踪点)
    Q_direct = -ε_ijk ∂ψ0/∂x0^i ∂u^s/∂x0^j F_sk
    G = Fᵀ·F_force

    Args:
        frame: 携带已同步映射的求值上下文
        psi: 位势涡度所用标签

    Returns:
        Multipliers
    """
    _check_sync(frame)
    lmap = frame.require_map()
    geometry = frame.geometry()
    eos = frame.eos
    ops = frame.ops
    state = frame.state
    points = lmap.positions

    recon = map_reconstruct(lmap, geometry)
    thermo_map = eos.evaluate(recon["rho_map"], recon["S_map"])
    thermo = frame.thermo()

    pv = dot(frame.vorticity(), frame.label_grad(psi))
    Q_chain = -geometry.J * frame.interp.sample(pv, points)
    grad_psi0 = lmap.labels0[psi].gradient(ops)
    velocity_jacobian = ops.jacobian(lmap.u)
    Q_direct = -dot(grad_psi0, axial(matmul(transpose(velocity_jacobian), lmap.F)))

    force_at = frame.interp.sample(frame_force(frame).total, points)
    return Multipliers(
        nu1=0.5 * norm2(lmap.u) - thermo_map.h,
        nu2=-lmap.rho0 * thermo_map.T,
        nu3=vecmat(recon["B_map"], lmap.F) / eos.mu0,
        nu4=-vecmat(lmap.u, lmap.F),
        mu1=0.5 * norm2(state.u) - thermo.h,
        mu2=-state.rho * thermo.T,
        mu3=state.B / eos.mu0,
        mu4=-state.u,
        Q_chain=Q_chain,
        Q_direct=Q_direct,
        G=vecmat(force_at, lmap.F),
    )


def multiplier_q_report(frame: Frame, multipliers: Multipliers) -> ConservationReport:
    """两种 Q 写法的逐点差，名称 nfa29"""
    return ConservationReport(
        name="nfa29",
        variant="Q",
        mode=frame.mode,
        t=frame.t,
        grid=frame.grid,
        residual=multipliers.Q_chain - multipliers.Q_direct,
        scale=term_scale(multipliers.Q_chain, multipliers.Q_direct),
        side="label",
    )


def multiplier_identity(frame: Frame, multipliers: Multipliers, on_shell: bool = False) -> ConservationReport:
    """
    乘子形式的 Bianchi 恒等式 (矢量)

    -x_ia E_i + ρ0 ∂_a ν1 - ν2 ∂_a S0 + B0^j (∂_j ν3_a - ∂_a ν3_j) + ρ0 dν4_a/dτ

    dν4/dτ = -(Fᵀa_x + (∇u F)ᵀ u)；on_shell 时 E 取 0
    """
    lmap = frame.require_map()
    ops = frame.ops
    E = np.zeros_like(lmap.u) if on_shell else frame.euler_lagrange()
    d_nu4 = -(vecmat(lmap.accel, lmap.F) + vecmat(lmap.u, matmul(lmap.grad_u, lmap.F)))
    jac3 = ops.jacobian(multipliers.nu3)

    terms = [
        -vecmat(E, lmap.F),
        lmap.rho0 * ops.grad(multipliers.nu1),
        -multipliers.nu2 * ops.grad(lmap.S0),
        np.einsum("aj...,j...->a...", jac3 - transpose(jac3), lmap.B0),
        lmap.rho0 * d_nu4,
    ]
    return ConservationReport(
        name="eq4.38",
        variant="on-shell" if on_shell else "off-shell",
        mode=frame.mode,
        t=frame.t,
        grid=frame.grid,
        residual=sum(terms),
        scale=term_scale(*terms),
        side="label",
    )


def multiplier_pullback(frame: Frame, multipliers: Multipliers) -> List[ConservationReport]:
    """
    标签乘子与欧拉乘子的对应关系

    ν1 = μ1(x)，ν2 = J μ2(x)，ν3 = Fᵀμ3(x)，ν4 = Fᵀμ4(x)，欧拉量插值到示踪点
    """
    lmap = frame.require_map()
    J = frame.geometry().J
    points = lmap.positions

    def at(values: np.ndarray) -> np.ndarray:
        return frame.interp.sample(values, points)

    pairs = {
        "nu1": (multipliers.nu1, at(multipliers.mu1)),
        "nu2": (multipliers.nu2, J * at(multipliers.mu2)),
        "nu3": (multipliers.nu3, vecmat(at(multipliers.mu3), lmap.F)),
        "nu4": (multipliers.nu4, vecmat(at(multipliers.mu4), lmap.F)),
    }
    return [
        ConservationReport(
            name="eq4.38c",
            variant=variant,
            mode=frame.mode,
            t=frame.t,
            grid=frame.grid,
            residual=label - pulled,
            scale=term_scale(label, pulled),
            side="label",
        )
        for variant, (label, pulled) in pairs.items()
    ]
