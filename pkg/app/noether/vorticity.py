"""
涡度方程相关恒等式
动量形式、涡度方程与 ∇ψ 的李拖曳
"""

from typing import Dict

import numpy as np

from app.numerics.algebra import cross, dot, norm2

from .force import frame_force
from .frame import Frame
from .report import ConservationReport, term_scale


def _velocity_rate(frame: Frame) -> np.ndarray:
    return frame.rate(lambda f: f.state.u, lambda f: f.tendency.u)


def _vorticity_rate(frame: Frame) -> np.ndarray:
    return frame.rate(lambda f: f.vorticity(), lambda f: f.vorticity_rate())


def _label_grad_rate(frame: Frame, psi: str) -> np.ndarray:
    return frame.rate(lambda f: f.label_grad(psi), lambda f: f.label_rate_grad(psi))


def momentum_form_residual(frame: Frame) -> np.ndarray:
    """u_t - u×ω + ∇|u|² - F"""
    state = frame.state
    return frame.cached(
        "momentum_form",
        lambda: _velocity_rate(frame)
        - cross(state.u, frame.vorticity())
        + frame.ops.grad(norm2(state.u))
        - frame_force(frame).total,
    )


def vorticity_residuals(frame: Frame, psi: str) -> Dict[str, ConservationReport]:
    """
    三个矢量残差报告

    Returns:
        {"momentum_form": nfa34, "vorticity_eq": nfa35, "grad_advect": nfa36}
    """
    state = frame.state
    ops = frame.ops
    force = frame_force(frame).total
    omega = frame.vorticity()

    u_t = _velocity_rate(frame)
    lamb = cross(state.u, omega)
    momentum = momentum_form_residual(frame)

    omega_t = _vorticity_rate(frame)
    curl_lamb = ops.curl(lamb)
    curl_force = ops.curl(force)
    vorticity = omega_t - curl_lamb - curl_force

    grad_psi_t = _label_grad_rate(frame, psi)
    transport = ops.grad(dot(state.u, frame.label_grad(psi)))
    drag = grad_psi_t + transport

    common = dict(mode=frame.mode, t=frame.t, grid=frame.grid)
    return {
        "momentum_form": ConservationReport(
            name="nfa34",
            residual=momentum,
            scale=term_scale(u_t, lamb, force),
            **common,
        ),
        "vorticity_eq": ConservationReport(
            name="nfa35",
            residual=vorticity,
            scale=term_scale(omega_t, curl_lamb, curl_force),
            **common,
        ),
        "grad_advect": ConservationReport(
            name="nfa36",
            variant=psi,
            residual=drag,
            scale=term_scale(grad_psi_t, transport),
            **common,
        ),
    }
