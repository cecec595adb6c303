"""
广义 Bianchi 恒等式 (Noether 第二定理)
标签侧在示踪点上求值，欧拉侧与 fullF 位势涡度守恒律共用同一条代码路径
"""

from dataclasses import replace

import numpy as np

from app.noether import ConservationReport, Frame, frame_force, pv_residual, term_scale
from app.noether.vorticity import momentum_form_residual
from app.numerics.algebra import cross, dot, matmul, vecmat

SIDES = ("label", "euler")


def perturb_acceleration(frame: Frame, delta: np.ndarray) -> Frame:
    """示踪点加速度叠加 delta 后的求值上下文 (缓存清空)，供非壳形式对照"""
    lmap = frame.require_map()
    return replace(frame, map=replace(lmap, accel=lmap.accel + delta), _cache={})


def _label_density(frame: Frame, psi: str) -> np.ndarray:
    """ρ0(ω·∇ψ)/ρ = ∇0ψ0·∇0×(Fᵀu)"""

    def compute():
        lmap = frame.require_map()
        grad_psi0 = lmap.labels0[psi].gradient(frame.ops)
        return dot(grad_psi0, frame.ops.curl(vecmat(lmap.u, lmap.F)))

    return frame.cached(f"bianchi_density:{psi}", compute)


def _label_density_rate(frame: Frame, psi: str) -> np.ndarray:
    """d(Fᵀu)/dt = Fᵀa_x + (∇u F)ᵀu"""
    lmap = frame.require_map()
    grad_psi0 = lmap.labels0[psi].gradient(frame.ops)
    dW = vecmat(lmap.accel, lmap.F) + vecmat(lmap.u, matmul(lmap.grad_u, lmap.F))
    return dot(grad_psi0, frame.ops.curl(dW))


def label_side(frame: Frame, psi: str, on_shell: bool = True) -> ConservationReport:
    """
    d/dt(ρ0 ω·∇ψ/ρ) - ∇0·(G×∇0ψ) + ∇0ψ·∇0×(FᵀE/ρ0)

    G = Fᵀ·F_force 在示踪点处插值；on_shell 时省略 E 项
    """
    lmap = frame.require_map()
    ops = frame.ops
    grad_psi0 = lmap.labels0[psi].gradient(ops)
    force_at = frame.interp.sample(frame_force(frame).total, lmap.positions)
    G = vecmat(force_at, lmap.F)

    rate = frame.rate(lambda f: _label_density(f, psi), lambda f: _label_density_rate(f, psi))
    flux_div = ops.div(cross(G, grad_psi0))
    residual = rate - flux_div
    terms = [rate, flux_div]
    if not on_shell:
        source = dot(grad_psi0, ops.curl(vecmat(frame.euler_lagrange(), lmap.F) / lmap.rho0))
        residual = residual + source
        terms.append(source)
    return ConservationReport(
        name="nfa15",
        variant="on-shell" if on_shell else "off-shell",
        mode=frame.mode,
        t=frame.t,
        grid=frame.grid,
        density=_label_density(frame, psi),
        flux=-cross(G, grad_psi0),
        residual=residual,
        scale=term_scale(*terms),
        side="label",
    )


def euler_side(frame: Frame, psi: str, on_shell: bool = True) -> ConservationReport:
    """
    ∂t(ω·∇ψ) + ∇·[(ω·∇ψ)u - F×∇ψ] + ∇ψ·∇×(E/ρ0)

    E/ρ0 = -(u_t - u×ω + ∇|u|² - F)；on_shell 时与 fullF 守恒律逐点相同
    """
    base = pv_residual(frame, psi, "fullF")
    residual = base.residual
    scale = base.scale
    if not on_shell:
        source = -dot(frame.label_grad(psi), frame.ops.curl(momentum_form_residual(frame)))
        residual = residual + source
        scale = max(scale, term_scale(source))
    return replace(
        base,
        name="nfa17",
        variant="on-shell" if on_shell else "off-shell",
        residual=residual,
        scale=scale,
        side="euler",
        premise_norms={},
        extra={"psi": psi},
        weight=None,
    )


def bianchi_residual(
    frame: Frame, psi: str = "psi", side: str = "label", on_shell: bool = True
) -> ConservationReport:
    """
    Args:
        frame: 求值上下文，标签侧需要已同步的映射
        psi: 位势涡度标签
        side: label | euler
        on_shell: 为 False 时计入实测的 Euler-Lagrange 残差 E

    Returns:
        ConservationReport (nfa15 或 nfa17)
    """
    if side not in SIDES:
        raise ValueError(f"未知 side {side!r}，可选: {SIDES}")
    if side == "label":
        return label_side(frame, psi, on_shell)
    return euler_side(frame, psi, on_shell)
