"""
映射上的代数重构、拉格朗日密度与欧拉-拉格朗日残差
"""

import logging
from typing import Dict, Optional

import numpy as np

from app.numerics import DiffOps, PeriodicInterpolator
from app.numerics.algebra import identity, matmul, matvec, norm2, outer
from app.solver import MhdState
from app.thermo import EquationOfState

from .geometry import MapGeometry
from .map import DesynchronizedError, LagrangianMap

logger = logging.getLogger(__name__)


def map_reconstruct(lmap: LagrangianMap, geometry: MapGeometry) -> Dict[str, np.ndarray]:
    """
    冻结定理的代数解

    ρ = ρ0/J，S = S0，B^i = x_ij B0^j / J
    """
    return {
        "rho_map": lmap.rho0 / geometry.J,
        "S_map": lmap.S0.copy(),
        "B_map": matvec(lmap.F, lmap.B0) / geometry.J,
    }


def reconstruction_mismatch(
    recon: Dict[str, np.ndarray],
    lmap: LagrangianMap,
    state: MhdState,
    interp: PeriodicInterpolator,
) -> Dict[str, np.ndarray]:
    """欧拉场在示踪点处的插值减去代数重构"""
    if abs(lmap.t - state.t) > 1e-10 * max(1.0, abs(state.t)):
        raise DesynchronizedError(f"映射时刻 {lmap.t:.12g} 与状态时刻 {state.t:.12g} 不一致")
    points = lmap.positions
    return {
        "rho": interp.sample(state.rho, points) - recon["rho_map"],
        "S": interp.sample(state.S, points) - recon["S_map"],
        "B": interp.sample(state.B, points) - recon["B_map"],
    }


def lagrangian_densities(
    lmap: LagrangianMap,
    geometry: MapGeometry,
    eos: EquationOfState,
    phi: Optional[np.ndarray] = None,
) -> Dict[str, np.ndarray]:
    """
    欧拉密度 ℓ 与标签密度 ℓ0 = ℓJ

    ℓ  = ½ρ|u|² - ε(ρ, S) - B²/2μ0 - ρΦ
    ℓ0 = ½ρ0|u|² - J ε(ρ0/J, S0) - x_ij x_is B0^j B0^s / (2μ0 J) - ρ0 Φ

    Args:
        phi: 示踪点处的引力势，缺省为 0

    Returns:
        {"ell", "ell0", "consistency"}
    """
    if lmap.u is None:
        raise DesynchronizedError("映射缺少示踪点速度，需先与状态同步")
    J = geometry.J
    recon = map_reconstruct(lmap, geometry)
    rho = recon["rho_map"]
    u2 = norm2(lmap.u)
    phi = np.zeros_like(J) if phi is None else phi

    ell = (
        0.5 * rho * u2
        - eos.internal_energy(rho, lmap.S0)
        - norm2(recon["B_map"]) / (2.0 * eos.mu0)
        - rho * phi
    )
    stretched = matvec(lmap.F, lmap.B0)
    ell0 = (
        0.5 * lmap.rho0 * u2
        - J * eos.internal_energy(lmap.rho0 / J, lmap.S0)
        - norm2(stretched) / (2.0 * eos.mu0 * J)
        - lmap.rho0 * phi
    )
    return {
        "ell": ell,
        "ell0": ell0,
        "consistency": float(np.max(np.abs(ell0 - ell * J))),
    }


def magnetic_stress(p: np.ndarray, B: np.ndarray, mu0: float) -> np.ndarray:
    """Π_ik = (p + B²/2μ0) δ_ik - B_i B_k / μ0"""
    total = p + norm2(B) / (2.0 * mu0)
    return total * identity(p.shape) - outer(B, B) / mu0


def euler_lagrange_residual(
    lmap: LagrangianMap,
    geometry: MapGeometry,
    eos: EquationOfState,
    label_ops: DiffOps,
    grad_phi: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    标签网格上的 E_x(ℓ0)

    E_i = -[ρ0 (du^i/dt + ∂Φ/∂x^i) + ∂/∂x0^j { A_kj Π_ik }]

    加速度取自欧拉动量倾向的插值 (lmap.accel)，标签导数为中心差分。
    """
    lmap.require_sync()
    recon = map_reconstruct(lmap, geometry)
    p = eos.pressure(recon["rho_map"], recon["S_map"])
    stress = matmul(magnetic_stress(p, recon["B_map"], eos.mu0), geometry.A)
    inertia = lmap.accel if grad_phi is None else lmap.accel + grad_phi
    return -(lmap.rho0 * inertia + label_ops.tensor_div(stress))
