"""
重标记对称的 Noether 流
标签空间 (I0, I) 与欧拉空间 (F0, Fvec)，以及二者之间的前推关系

生成元以鸭子类型传入 (见 app.relabel.generator.SymmetryGenerator)，
需要提供 label_cross、momentum_weight、momentum_weight_rate 与 eulerian 方法。
"""

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

import numpy as np

from app.lagrange import (
    lagrangian_densities,
    magnetic_stress,
    map_reconstruct,
)
from app.numerics.algebra import cross, dot, matmul, matvec, norm2, vecmat

from .frame import Frame
from .report import ConservationReport, term_scale

if TYPE_CHECKING:
    from app.relabel.generator import SymmetryGenerator

logger = logging.getLogger(__name__)


class MissingFoliationError(ValueError):
    """场景没有定义叶状结构，无法构造重标记生成元"""


@dataclass
class NoetherCurrents:
    I0: np.ndarray
    I: np.ndarray
    I_generic: np.ndarray
    F0: np.ndarray
    Fvec: np.ndarray
    flux_4_35da: np.ndarray
    pushforward_check: float
    generic_path_check: float
    flux_check: float
    conservation_residual: ConservationReport
    label_residual: Optional[ConservationReport] = None
    pushforward: Dict[str, np.ndarray] = field(default_factory=dict)

    def reports(self) -> List[ConservationReport]:
        reports = [self.conservation_residual]
        if self.label_residual is not None:
            reports.append(self.label_residual)
        return reports


def _require_generator(generator) -> "SymmetryGenerator":
    if generator is None:
        raise MissingFoliationError("该场景没有叶状结构 (scenario.foliation = none)，无法计算 Noether 流")
    return generator


def _phi_grad(frame: Frame) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """欧拉网格上的 Φ 与其梯度，无引力时为 (0, None)"""
    if frame.state.Phi is None:
        return np.zeros(frame.grid.shape), None
    return frame.state.Phi, frame.ops.grad(frame.state.Phi)


def eulerian_current(frame: Frame, generator) -> Dict[str, np.ndarray]:
    """
    F0 = ρu·V̂

    Fvec = ρu(u·V̂) + V̂(ε + p + ρΦ + B²/μ0 - ½ρu²) - B(B·V̂)/μ0，Λ = 0
    """
    generator = _require_generator(generator)
    state = frame.state
    mu0 = frame.eos.mu0
    thermo = frame.thermo()
    phi, _ = _phi_grad(frame)
    weight = generator.momentum_weight(frame)
    V = generator.eulerian(frame)
    u2 = norm2(state.u)
    B2 = norm2(state.B)

    F0 = dot(state.u, weight)
    enthalpy_like = thermo.eps + thermo.p + state.rho * phi + B2 / mu0 - 0.5 * state.rho * u2
    Fvec = F0 * state.u + V * enthalpy_like - state.B * dot(state.B, V) / mu0

    # 伪电场 Ẽ = -V̂×B
    E_pseudo = -cross(V, state.B)
    flux = (
        F0 * state.u
        + weight * (thermo.h + phi - 0.5 * u2)
        + cross(E_pseudo, state.B) / mu0
    )
    return {"F0": F0, "Fvec": Fvec, "flux_4_35da": flux, "E_pseudo": E_pseudo}


def _eulerian_density_rate(frame: Frame, generator) -> np.ndarray:
    """∂t(u·W) = u_t·W + u·W_t，W = ρV̂"""
    return dot(frame.tendency.u, generator.momentum_weight(frame)) + dot(
        frame.state.u, generator.momentum_weight_rate(frame)
    )


def label_current(frame: Frame, generator) -> Dict[str, np.ndarray]:
    """
    标签空间流，a = ∇0ψ×∇0χ = -ρ0 V^{x0}

    I0 = a·(Fᵀu)
    I  = a (p + B²/2μ0 - ℓ)/ρ - (a·FᵀB) B0/(μ0 ρ0)
    I_generic = V̂ Π A + V^{x0} ℓ0，V̂ = -F V^{x0}
    """
    generator = _require_generator(generator)
    lmap = frame.require_map()
    geometry = frame.geometry()
    eos = frame.eos
    recon = map_reconstruct(lmap, geometry)
    rho = recon["rho_map"]
    B = recon["B_map"]
    p = eos.pressure(rho, recon["S_map"])
    phi = None
    if frame.state.Phi is not None:
        phi = frame.interp.sample(frame.state.Phi, lmap.positions)
    densities = lagrangian_densities(lmap, geometry, eos, phi)
    ell = densities["ell"]

    a = generator.label_cross(frame)
    V0 = -a / lmap.rho0
    V_hat = -matvec(lmap.F, V0)
    total_pressure = p + norm2(B) / (2.0 * eos.mu0)

    I0 = dot(a, vecmat(lmap.u, lmap.F))
    nu = vecmat(B, lmap.F)
    I = a * (total_pressure - ell) / rho - dot(a, nu) * lmap.B0 / (eos.mu0 * lmap.rho0)
    stress_cof = matmul(magnetic_stress(p, B, eos.mu0), geometry.A)
    I_generic = vecmat(V_hat, stress_cof) + V0 * densities["ell0"]
    return {"I0": I0, "I": I, "I_generic": I_generic, "V_hat": V_hat}


def _label_density_rate(frame: Frame, generator) -> np.ndarray:
    """∂t I0 = a·(Fᵀ a_x + (∇u F)ᵀ u)"""
    lmap = frame.require_map()
    a = generator.label_cross(frame)
    dW = vecmat(lmap.accel, lmap.F) + vecmat(lmap.u, matmul(lmap.grad_u, lmap.F))
    return dot(a, dW)


def pushforward_currents(
    I0: np.ndarray, I: np.ndarray, frame: Frame
) -> Dict[str, np.ndarray]:
    """F0 = I0/J，Fvec = (u I0 + F·I)/J，结果位于示踪点"""
    lmap = frame.require_map()
    J = frame.geometry().J
    return {"F0": I0 / J, "Fvec": (lmap.u * I0 + matvec(lmap.F, I)) / J}


def gauge_transform(gauge0: np.ndarray, lmap, J: np.ndarray) -> np.ndarray:
    """
    四分量规范场的前推

    Λ^0 = Λ0^0/J，Λ^i = (u^i Λ0^0 + x_ij Λ0^j)/J

    Args:
        gauge0: 形状 (4, ...) 的标签空间规范场
        lmap: 已同步的映射
        J: det F

    Returns:
        形状 (4, ...) 的欧拉规范场 (位于示踪点)
    """
    lmap.require_sync()
    gauge0 = np.asarray(gauge0, dtype=float)
    out = np.empty_like(gauge0)
    out[0] = gauge0[0] / J
    out[1:] = (lmap.u * gauge0[0] + matvec(lmap.F, gauge0[1:])) / J
    return out


def noether_currents(frame: Frame, generator) -> NoetherCurrents:
    """
    计算标签与欧拉两侧的 Noether 流及其守恒残差

    Args:
        frame: 携带已同步映射的求值上下文
        generator: 由叶状结构构造的对称生成元，None 时报 MissingFoliationError

    Returns:
        NoetherCurrents，conservation_residual 名称 eq4.35da，label_residual 名称 eq4.22
    """
    generator = _require_generator(generator)
    euler = eulerian_current(frame, generator)
    rate = frame.rate(
        lambda f: eulerian_current(f, generator)["F0"],
        lambda f: _eulerian_density_rate(f, generator),
    )
    divergence = frame.ops.div(euler["flux_4_35da"])
    flux_check = float(np.max(np.abs(euler["flux_4_35da"] - euler["Fvec"])))
    conservation = ConservationReport(
        name="eq4.35da",
        mode=frame.mode,
        t=frame.t,
        grid=frame.grid,
        density=euler["F0"],
        flux=euler["flux_4_35da"],
        residual=rate + divergence,
        scale=term_scale(rate, divergence),
        extra={"flux_check": flux_check},
    )

    currents = NoetherCurrents(
        I0=np.zeros(frame.grid.shape),
        I=frame.grid.zeros(3),
        I_generic=frame.grid.zeros(3),
        F0=euler["F0"],
        Fvec=euler["Fvec"],
        flux_4_35da=euler["flux_4_35da"],
        pushforward_check=float("nan"),
        generic_path_check=float("nan"),
        flux_check=flux_check,
        conservation_residual=conservation,
    )
    if frame.map is None:
        return currents

    lmap = frame.require_map()
    label = label_current(frame, generator)
    pushed = pushforward_currents(label["I0"], label["I"], frame)
    points = lmap.positions
    sampled_F0 = frame.interp.sample(euler["F0"], points)
    sampled_Fvec = frame.interp.sample(euler["Fvec"], points)
    currents.I0 = label["I0"]
    currents.I = label["I"]
    currents.I_generic = label["I_generic"]
    currents.pushforward = pushed
    currents.pushforward_check = float(
        max(
            np.max(np.abs(pushed["F0"] - sampled_F0)),
            np.max(np.abs(pushed["Fvec"] - sampled_Fvec)),
        )
    )
    currents.generic_path_check = float(np.max(np.abs(label["I_generic"] - label["I"])))

    label_ops = frame.ops
    E = frame.euler_lagrange()
    I0_rate = frame.rate(
        lambda f: label_current(f, generator)["I0"],
        lambda f: _label_density_rate(f, generator),
    )
    label_div = label_ops.div(label["I"])
    source = dot(label["V_hat"], E)
    currents.label_residual = ConservationReport(
        name="eq4.22",
        mode=frame.mode,
        t=frame.t,
        grid=frame.grid,
        density=label["I0"],
        flux=label["I"],
        residual=I0_rate + label_div + source,
        scale=term_scale(I0_rate, label_div),
        side="label",
        extra={
            "pushforward_check": currents.pushforward_check,
            "generic_path_check": currents.generic_path_check,
        },
    )
    conservation.extra["pushforward_check"] = currents.pushforward_check
    return currents
