"""
标签空间叶状结构
三个势 (φ, χ, ψ) 给出对偶基、度规、ρ0、B0 = ∇0ψ×∇0φ 与非场向生成元 V^{x0} = ∇0χ×∇0ψ/ρ0
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from app.numerics import DiffOps, Grid
from app.numerics.algebra import (
    LEVI_CIVITA,
    cross,
    determinant,
    dot,
    identity,
    inverse,
    matvec,
    transpose,
)
from app.solver import Label

logger = logging.getLogger(__name__)

POTENTIAL_NAMES = ("phi", "chi", "psi")

CoordinateFn = Callable[[np.ndarray], np.ndarray]


class SingularFoliationError(ValueError):
    """势函数的 Jacobian 在某个标签点退化"""

    def __init__(self, message: str, location: Optional[Tuple] = None):
        super().__init__(message)
        self.location = location


def _zero_scalar(coords: np.ndarray) -> np.ndarray:
    return np.zeros(coords.shape[1:])


def _zero_vector(coords: np.ndarray) -> np.ndarray:
    return np.zeros(coords.shape)


@dataclass
class LabelPotential:
    """
    闭式标签函数 k·x0 + f(x0)，带解析梯度

    periodic 与 periodic_grad 以坐标数组 (3, ...) 为输入。
    """

    name: str
    ramp: np.ndarray = field(default_factory=lambda: np.zeros(3))
    periodic: CoordinateFn = _zero_scalar
    periodic_grad: CoordinateFn = _zero_vector

    def __post_init__(self):
        self.ramp = np.asarray(self.ramp, dtype=float).reshape(3)

    def value(self, coords: np.ndarray) -> np.ndarray:
        return np.tensordot(self.ramp, coords, axes=1) + self.periodic(coords)

    def gradient(self, coords: np.ndarray) -> np.ndarray:
        ramp = self.ramp.reshape((3,) + (1,) * (coords.ndim - 1))
        return ramp + self.periodic_grad(coords)

    def as_label(self, grid: Grid) -> Label:
        return Label(self.periodic(grid.coords()), self.ramp)


@dataclass
class EntropyClosure:
    """S0 = S(χ, ψ)，uses 记录依赖的势"""

    kind: str = "chi"
    s0: float = 0.0
    amplitude: float = 0.1

    KINDS = ("uniform", "chi", "product")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"未知熵闭合 {self.kind!r}，可选: {self.KINDS}")

    @property
    def uses(self) -> Tuple[str, ...]:
        return {"uniform": (), "chi": ("chi",), "product": ("chi", "psi")}[self.kind]

    def __call__(self, chi: np.ndarray, psi: np.ndarray) -> np.ndarray:
        if self.kind == "uniform":
            return np.full(np.shape(chi), self.s0)
        if self.kind == "chi":
            return self.s0 + self.amplitude * np.sin(chi)
        return self.s0 + self.amplitude * np.sin(chi) * np.sin(psi)


def cartesian_potentials() -> Dict[str, LabelPotential]:
    """(φ, χ, ψ) = (x0, y0, z0)"""
    return {
        name: LabelPotential(name, ramp=np.eye(3)[i])
        for i, name in enumerate(POTENTIAL_NAMES)
    }


def curved_potentials(amplitude: float = 0.1) -> Dict[str, LabelPotential]:
    """(φ, χ, ψ) = (x0, y0 + a sin x0, z0 + a cos y0)"""
    a = amplitude

    def chi_grad(c):
        g = np.zeros(c.shape)
        g[0] = a * np.cos(c[0])
        return g

    def psi_grad(c):
        g = np.zeros(c.shape)
        g[1] = -a * np.sin(c[1])
        return g

    return {
        "phi": LabelPotential("phi", ramp=(1.0, 0.0, 0.0)),
        "chi": LabelPotential(
            "chi",
            ramp=(0.0, 1.0, 0.0),
            periodic=lambda c: a * np.sin(c[0]),
            periodic_grad=chi_grad,
        ),
        "psi": LabelPotential(
            "psi",
            ramp=(0.0, 0.0, 1.0),
            periodic=lambda c: a * np.cos(c[1]),
            periodic_grad=psi_grad,
        ),
    }


FOLIATION_PRESETS: Dict[str, Callable[..., Dict[str, LabelPotential]]] = {
    "cartesian": lambda amplitude=0.0: cartesian_potentials(),
    "curved": curved_potentials,
}


@dataclass
class Foliation:
    """
    标签网格上求值的叶状结构

    omega[a] = ∇0 (第 a 个势)，basis[a] = e_a = ∂x0/∂(第 a 个势)
    """

    grid: Grid
    potentials: Dict[str, LabelPotential]
    closure: EntropyClosure
    omega: np.ndarray
    basis: np.ndarray
    g_lower: np.ndarray
    g_upper: np.ndarray
    rho0: np.ndarray
    B0: np.ndarray
    rho0V: np.ndarray
    V: np.ndarray
    b0: np.ndarray
    S0: np.ndarray

    def labels(self) -> Dict[str, Label]:
        """作为平流标签携带的 (φ, χ, ψ)"""
        return {name: p.as_label(self.grid) for name, p in self.potentials.items()}


def foliation_build(
    phi: LabelPotential,
    chi: LabelPotential,
    psi: LabelPotential,
    closure: EntropyClosure,
    grid: Grid,
    tolerance: float = 1e-12,
) -> Foliation:
    """
    在标签网格上求值所有叶状结构量

    Args:
        phi, chi, psi: 三个势，需函数无关
        closure: 熵闭合 S(χ, ψ)
        grid: 标签网格 (即初始欧拉网格)
        tolerance: det(∇φ, ∇χ, ∇ψ) 的最小允许值

    Returns:
        Foliation

    Raises:
        SingularFoliationError: 某点 Jacobian ≤ tolerance
    """
    named = {"chi": chi, "psi": psi}
    for name in closure.uses:
        ramp = named[name].ramp
        for axis, active in enumerate(grid.active):
            if not active and ramp[axis] != 0.0:
                raise ValueError(
                    f"熵闭合 {closure.kind!r} 依赖 {name}，其沿非活动维度 {axis} 变化，"
                    "2.5D 网格无法表示"
                )
    coords = grid.coords()
    omega = np.stack([p.gradient(coords) for p in (phi, chi, psi)])
    jac = determinant(omega)
    if np.any(jac <= tolerance):
        where = tuple(int(i) for i in np.unravel_index(np.argmin(jac), jac.shape))
        raise SingularFoliationError(
            f"叶状结构退化: det(∇φ,∇χ,∇ψ) = {jac[where]:.3e}，标签位置 {where}", where
        )
    basis = transpose(inverse(omega, jac))
    grad_phi, grad_chi, grad_psi = omega
    rho0 = jac
    B0 = cross(grad_psi, grad_phi)
    rho0V = cross(grad_chi, grad_psi)
    return Foliation(
        grid=grid,
        potentials={"phi": phi, "chi": chi, "psi": psi},
        closure=closure,
        omega=omega,
        basis=basis,
        g_lower=np.einsum("ai...,bi...->ab...", basis, basis),
        g_upper=np.einsum("ai...,bi...->ab...", omega, omega),
        rho0=rho0,
        B0=B0,
        rho0V=rho0V,
        V=rho0V / rho0,
        b0=B0 / rho0,
        S0=closure(chi.value(coords), psi.value(coords)),
    )


def lie_bracket(a: np.ndarray, b: np.ndarray, ops: DiffOps) -> np.ndarray:
    """[a, b]^i = a^j ∂_j b^i - b^j ∂_j a^i"""
    return matvec(ops.jacobian(b), a) - matvec(ops.jacobian(a), b)


def potential_curl(
    outer: Label, inner: Label, ops: DiffOps
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    ∇o×∇i 的离散旋度形式

    o∇i 的周期规范部分 A = õ k_i - ĩ k_o + õ∇ĩ，均匀部分 k_o×k_i，
    因此 mean + ∇×A 的离散散度为舍入误差。

    Returns:
        (mean, A, field)
    """
    shape = (3,) + (1,) * outer.periodic.ndim
    k_o = outer.ramp.reshape(shape)
    k_i = inner.ramp.reshape(shape)
    potential = (
        outer.periodic * k_i
        - inner.periodic * k_o
        + outer.periodic * ops.grad(inner.periodic)
    )
    mean = np.cross(outer.ramp, inner.ramp)
    return mean, potential, mean.reshape(shape) + ops.curl(potential)


def basis_residuals(foliation: Foliation, ops: DiffOps) -> Dict[str, np.ndarray]:
    """
    对偶基、叉积关系与李括号的逐点残差

    ω^a 取标签差分 (斜坡部分精确)，e_a 为解析值；笛卡尔叶状结构下全部为舍入误差。

    Returns:
        {"duality", "cross_basis", "cross_dual", "bracket"}
    """
    labels = foliation.labels()
    omega = np.stack([labels[n].gradient(ops) for n in POTENTIAL_NAMES])
    basis = foliation.basis
    sqrt_g = 1.0 / foliation.rho0

    cross_basis = []
    cross_dual = []
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        cross_basis.append(cross(basis[a], basis[b]) - sqrt_g * LEVI_CIVITA[a, b, c] * omega[c])
        cross_dual.append(cross(omega[a], omega[b]) - LEVI_CIVITA[a, b, c] * basis[c] / sqrt_g)
    return {
        "duality": np.einsum("ai...,bi...->ab...", omega, basis) - identity(foliation.grid.shape),
        "cross_basis": np.stack(cross_basis),
        "cross_dual": np.stack(cross_dual),
        "bracket": lie_bracket(foliation.b0, foliation.V, ops),
    }


def basis_checks(foliation: Foliation, ops: DiffOps) -> Dict[str, float]:
    """basis_residuals 的 L∞ 汇总"""
    r = basis_residuals(foliation, ops)
    return {
        "duality_err": float(np.max(np.abs(r["duality"]))),
        "metric_consistency_err": max(
            float(np.max(np.abs(r["cross_basis"]))), float(np.max(np.abs(r["cross_dual"])))
        ),
        "bracket_err": float(np.max(np.abs(r["bracket"]))),
    }


def construction_residuals(foliation: Foliation, ops: DiffOps) -> Dict[str, np.ndarray]:
    """
    ρ0V = ∇0×(χ∇0ψ)，B0 = ∇0×(ψ∇0φ) 及相关散度、V·∇0S0、∇0×(V×B0)
    """
    labels = foliation.labels()
    _, _, rho0V_curl = potential_curl(labels["chi"], labels["psi"], ops)
    _, _, B0_curl = potential_curl(labels["psi"], labels["phi"], ops)
    return {
        "div_rho0V": ops.div(foliation.rho0V),
        "div_B0": ops.div(foliation.B0),
        "rho0V_curl_form": rho0V_curl - foliation.rho0V,
        "B0_curl_form": B0_curl - foliation.B0,
        "div_rho0V_curl_form": ops.div(rho0V_curl),
        "div_B0_curl_form": ops.div(B0_curl),
        "V_dot_gradS0": dot(foliation.V, ops.grad(foliation.S0)),
        "induction": ops.curl(cross(foliation.V, foliation.B0)),
    }


def construction_identities(foliation: Foliation, ops: DiffOps) -> Dict[str, float]:
    """construction_residuals 的 L∞ 汇总"""
    return {
        name: float(np.max(np.abs(values)))
        for name, values in construction_residuals(foliation, ops).items()
    }
