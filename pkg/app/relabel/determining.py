"""
李确定方程与散度对称条件
标签侧四条、欧拉侧三组 (质量、熵、动量变分、感应) 以及散度对称的完整左端
"""

from typing import Dict, List

import numpy as np

from app.noether import ConservationReport, Frame, term_scale
from app.numerics.algebra import cross, dot, inverse, magnitude, matvec, norm2

from .generator import SymmetryGenerator


def _report(frame: Frame, name: str, variant: str, residual, scale, side=None) -> ConservationReport:
    return ConservationReport(
        name=name,
        variant=variant,
        mode=frame.mode,
        t=frame.t,
        grid=frame.grid,
        residual=residual,
        scale=scale,
        side=side,
    )


def label_set(frame: Frame, generator: SymmetryGenerator) -> List[ConservationReport]:
    """
    标签侧确定方程

    ∇0·(ρ0V)、V·∇0S0、ρ0V 的时间漂移 (由欧拉 V̂ 经 -F⁻¹ 拉回)、∇0×(V×B0)
    """
    lmap = frame.require_map()
    ops = frame.ops
    rho0V = -generator.label_cross(frame)
    V = rho0V / lmap.rho0
    grad_S0 = ops.grad(lmap.S0)

    sampled = frame.interp.sample(generator.eulerian(frame), lmap.positions)
    pulled = -lmap.rho0 * matvec(inverse(lmap.F, frame.geometry().J), sampled)
    drift = pulled - rho0V

    VxB0 = cross(V, lmap.B0)
    reports = [
        _report(frame, "eq4.34", "mass", ops.div(rho0V), term_scale(rho0V), "label"),
        _report(
            frame,
            "eq4.34",
            "entropy",
            dot(V, grad_S0),
            term_scale(magnitude(V) * magnitude(grad_S0)),
            "label",
        ),
        _report(frame, "eq4.34", "drift", drift, term_scale(rho0V), "label"),
        _report(frame, "eq4.34", "induction", ops.curl(VxB0), term_scale(VxB0), "label"),
    ]
    return reports


def velocity_variation(frame: Frame, generator: SymmetryGenerator) -> Dict[str, np.ndarray]:
    """欧拉速度变分的构件 dV̂/dt 与 V̂·∇u"""
    V = generator.eulerian(frame)
    ops = frame.ops
    total_rate = generator.eulerian_rate(frame) + ops.advect(frame.state.u, V)
    stretch = matvec(ops.jacobian(frame.state.u), V)
    return {"material_rate": total_rate, "stretch": stretch, "variation": total_rate - stretch}


def euler_set(frame: Frame, generator: SymmetryGenerator) -> List[ConservationReport]:
    """
    欧拉侧确定方程

    ∇·(ρV̂)、V̂·∇S、ρu·(dV̂/dt - V̂·∇u) (另报矢量形式)、B·∇×(V̂×B)
    """
    state = frame.state
    ops = frame.ops
    weight = generator.momentum_weight(frame)
    V = generator.eulerian(frame)
    grad_S = ops.grad(state.S)
    parts = velocity_variation(frame, generator)
    variation = parts["variation"]
    speed = magnitude(state.u)
    induction_curl = ops.curl(cross(V, state.B))

    return [
        _report(frame, "eq4.35a", "mass", ops.div(weight), term_scale(weight)),
        _report(
            frame,
            "eq4.35a",
            "entropy",
            dot(V, grad_S),
            term_scale(magnitude(V) * magnitude(grad_S)),
        ),
        _report(
            frame,
            "eq4.35b",
            "momentum",
            state.rho * dot(state.u, variation),
            term_scale(
                state.rho * speed * magnitude(parts["material_rate"]),
                state.rho * speed * magnitude(parts["stretch"]),
            ),
        ),
        _report(
            frame,
            "eq4.35b",
            "momentum_vector",
            state.rho * variation,
            term_scale(state.rho * parts["material_rate"], state.rho * parts["stretch"]),
        ),
        _report(
            frame,
            "eq4.35c",
            "induction",
            dot(state.B, induction_curl),
            term_scale(magnitude(state.B) * magnitude(induction_curl)),
        ),
    ]


def divergence_symmetry(frame: Frame, generator: SymmetryGenerator) -> ConservationReport:
    """
    散度对称条件的完整左端 (Λ = 0)

    ∇·(ρV̂)(h + Φ - ½u²) + ρT V̂·∇S + ρu·(dV̂/dt - V̂·∇u) + (B/μ0)·[-∇×(V̂×B) + V̂ ∇·B]
    """
    state = frame.state
    ops = frame.ops
    thermo = frame.thermo()
    phi = state.Phi if state.Phi is not None else 0.0
    weight = generator.momentum_weight(frame)
    V = generator.eulerian(frame)
    variation = velocity_variation(frame, generator)["variation"]

    terms = [
        ops.div(weight) * (thermo.h + phi - 0.5 * norm2(state.u)),
        state.rho * thermo.T * dot(V, ops.grad(state.S)),
        state.rho * dot(state.u, variation),
        dot(state.B, -ops.curl(cross(V, state.B)) + V * ops.div(state.B)) / frame.eos.mu0,
    ]
    return _report(frame, "eq4.35aa", "", sum(terms), term_scale(*terms))


def determining_residuals(frame: Frame, generator: SymmetryGenerator) -> Dict[str, List[ConservationReport]]:
    """
    全部确定方程残差

    Returns:
        {"label_set": [...], "euler_set": [...], "divergence_symmetry": [...]}，
        没有映射时 label_set 为空
    """
    generator.check_labels(frame.state, frame.map)
    return {
        "label_set": label_set(frame, generator) if frame.map is not None else [],
        "euler_set": euler_set(frame, generator),
        "divergence_symmetry": [divergence_symmetry(frame, generator)],
    }
