"""
位势涡度守恒律
密度 ω·∇ψ，三种通量写法: hydro (Ertel)、mhd (非势部分)、fullF (全部广义力)
"""

import logging
from typing import Dict, Optional

import numpy as np

from app.numerics import DiffOps, ScalarField
from app.numerics.algebra import cross, dot, magnitude
from app.solver import MhdState

from .force import frame_force
from .frame import Frame
from .report import ConservationReport, term_scale

logger = logging.getLogger(__name__)

PV_VARIANTS: Dict[str, str] = {
    "hydro": "eq1.2",
    "mhd": "eq1.3",
    "fullF": "nfa19",
}


def pv_density(state: MhdState, psi: str, ops: Optional[DiffOps] = None) -> ScalarField:
    """ω·∇ψ，ω = ∇×u"""
    ops = ops or DiffOps(state.grid)
    grad_psi = state.label(psi).gradient(ops)
    return ScalarField(state.grid, dot(ops.curl(state.u), grad_psi), f"pv:{psi}")


def frame_pv(frame: Frame, psi: str) -> np.ndarray:
    return frame.cached(
        f"pv:{psi}", lambda: dot(frame.vorticity(), frame.label_grad(psi))
    )


def pv_rate(frame: Frame, psi: str) -> np.ndarray:
    """∂t(ω·∇ψ) = (∇×u_t)·∇ψ + ω·∇ψ_t"""
    return dot(frame.vorticity_rate(), frame.label_grad(psi)) + dot(
        frame.vorticity(), frame.label_rate_grad(psi)
    )


def pv_flux(frame: Frame, psi: str, variant: str) -> np.ndarray:
    if variant not in PV_VARIANTS:
        raise ValueError(f"未知通量写法 {variant!r}，可选: {sorted(PV_VARIANTS)}")
    grad_psi = frame.label_grad(psi)
    flux = frame_pv(frame, psi) * frame.state.u
    if variant == "mhd":
        flux = flux - cross(frame_force(frame).nonpotential, grad_psi)
    elif variant == "fullF":
        flux = flux - cross(frame_force(frame).total, grad_psi)
    if frame.curl_term:
        # 散度不变的旋度项 ∇×[(u·∇ψ)u]
        flux = flux - frame.ops.curl(dot(frame.state.u, grad_psi) * frame.state.u)
    return flux


def pv_residual(frame: Frame, psi: str, variant: str = "mhd") -> ConservationReport:
    """
    ∂t(ω·∇ψ) + ∇·flux

    hydro 写法在 B≠0 或 ∇ψ×∇S≠0 时只标记前提不满足，不中止。

    Returns:
        ConservationReport，名称为 eq1.2 / eq1.3 / nfa19
    """
    flux = pv_flux(frame, psi, variant)
    rate = frame.rate(lambda f: frame_pv(f, psi), lambda f: pv_rate(f, psi))
    divergence = frame.ops.div(flux)
    state = frame.state

    premises = {}
    if variant == "hydro":
        premises["B_linf"] = float(np.max(magnitude(state.B)))
        alignment = cross(frame.label_grad(psi), frame.ops.grad(state.S))
        premises["gradpsi_x_gradS_linf"] = float(np.max(magnitude(alignment)))
        if premises["B_linf"] > 0 or premises["gradpsi_x_gradS_linf"] > 1e-12:
            logger.warning(
                "hydro 写法前提不满足: |B|∞=%.3e, |∇ψ×∇S|∞=%.3e",
                premises["B_linf"],
                premises["gradpsi_x_gradS_linf"],
            )
    advection = frame.tendency.labels[psi] + dot(state.u, frame.label_grad(psi))
    premises["advection_linf"] = float(np.max(np.abs(advection)))

    return ConservationReport(
        name=PV_VARIANTS[variant],
        variant=variant,
        mode=frame.mode,
        t=frame.t,
        grid=frame.grid,
        density=frame_pv(frame, psi),
        flux=flux,
        residual=rate + divergence,
        scale=term_scale(rate, divergence),
        premise_norms=premises,
        extra={"psi": psi, "curl_term": frame.curl_term},
    )
