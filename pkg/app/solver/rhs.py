"""
理想 MHD 右端项
原始变量、非守恒型中心差分；感应方程用旋度形式以保持离散 ∇·B
"""

import logging
from typing import Optional

import numpy as np

from app.numerics import DiffOps
from app.numerics.algebra import cross, dot
from app.thermo import EosDomainError, EquationOfState

from .state import MhdState, SolverAbort, Tendency

logger = logging.getLogger(__name__)


def label_tendency(state: MhdState, name: str, ops: DiffOps) -> np.ndarray:
    """∂ψ̃/∂t = -u·∇ψ，含斜坡贡献"""
    return -dot(state.u, state.label(name).gradient(ops))


def mhd_rhs(
    state: MhdState, eos: EquationOfState, ops: Optional[DiffOps] = None
) -> Tendency:
    """
    计算所有预报场的时间导数

    ∂ρ/∂t = -∇·(ρu)
    ∂u/∂t = -u·∇u - ∇p/ρ + J×B/ρ - ∇Φ，J = ∇×B/μ0
    ∂S/∂t = -u·∇S
    ∂B/∂t = ∇×(u×B)
    ∂ψ/∂t = -u·∇ψ
    ∂A/∂t = u×B - ∇(u·A)  (A·dx 被李拖曳的规范)

    Args:
        state: 当前状态
        eos: 状态方程
        ops: 差分算子，缺省按状态网格新建

    Returns:
        Tendency
    """
    ops = ops or DiffOps(state.grid)
    rho, u, B = state.rho, state.u, state.B
    try:
        p = eos.pressure(rho, state.S)
    except EosDomainError as e:
        where = tuple(int(i) for i in np.argwhere(~(rho > 0))[0])
        raise SolverAbort(f"右端项求值失败: {e}", "rho", where) from e

    current = ops.curl(B) / eos.mu0
    du = -ops.advect(u, u) - ops.grad(p) / rho + cross(current, B) / rho
    if state.Phi is not None:
        du -= ops.grad(state.Phi)

    tendency = Tendency(
        rho=-ops.div(rho * u),
        u=du,
        S=-ops.advect(u, state.S),
        B=ops.curl(cross(u, B)),
        labels={name: label_tendency(state, name, ops) for name in state.labels},
        A=None
        if state.A is None
        else cross(u, B) - ops.grad(dot(u, state.A)),
    )
    tendency.check_finite()
    return tendency


def material_acceleration(
    state: MhdState, tendency: Tendency, ops: DiffOps
) -> np.ndarray:
    """du/dt = ∂u/∂t + u·∇u，取自动量倾向"""
    return tendency.u + ops.advect(state.u, state.u)
