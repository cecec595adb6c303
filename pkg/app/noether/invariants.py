"""
平流不变量库与沿示踪点的漂移监测
ψ1 = B·∇S/ρ，ψ2 = A·B/ρ，ψ3 = (B·∇)(ψ2)/ρ，Ertel 不变量 ω·∇S/ρ
"""

import logging
from typing import Dict, Iterable, List, Optional

import numpy as np

from app.numerics import DiffOps, Grid, ScalarField
from app.numerics.algebra import dot
from app.solver import MhdState

from .frame import Frame
from .report import ConservationReport

logger = logging.getLogger(__name__)

INVARIANT_NAMES = ("psi1", "psi2", "psi3")

DRIFT_TAGS: Dict[str, str] = {
    "psi1": "nfa31",
    "psi2": "nfa31",
    "psi3": "nfa31",
    "ertel": "eq1.1",
}


class InvariantConfigError(ValueError):
    """请求了缺少前提场的不变量 (如无矢势时的 ψ2/ψ3)"""


def advected_invariants(
    state: MhdState,
    ops: Optional[DiffOps] = None,
    names: Iterable[str] = INVARIANT_NAMES,
) -> Dict[str, ScalarField]:
    """
    计算平流标量不变量

    Args:
        state: 欧拉状态，ψ2/ψ3 需要携带矢势 A
        names: 需要的不变量子集

    Returns:
        名称到 ScalarField 的字典
    """
    names = list(names)
    unknown = sorted(set(names) - set(INVARIANT_NAMES))
    if unknown:
        raise InvariantConfigError(f"未知不变量 {unknown}，可选: {INVARIANT_NAMES}")
    if state.A is None and ({"psi2", "psi3"} & set(names)):
        raise InvariantConfigError(
            "ψ2/ψ3 需要矢势 A，请设置 scenario.vector_potential = true"
        )
    ops = ops or DiffOps(state.grid)
    result: Dict[str, ScalarField] = {}
    if "psi1" in names:
        psi1 = dot(state.B, ops.grad(state.S)) / state.rho
        result["psi1"] = ScalarField(state.grid, psi1, "psi1")
    if "psi2" in names or "psi3" in names:
        psi2 = dot(state.A, state.B) / state.rho
        if "psi2" in names:
            result["psi2"] = ScalarField(state.grid, psi2, "psi2")
        if "psi3" in names:
            psi3 = dot(state.B, ops.grad(psi2)) / state.rho
            result["psi3"] = ScalarField(state.grid, psi3, "psi3")
    return result


def ertel_invariant(state: MhdState, ops: Optional[DiffOps] = None) -> ScalarField:
    """ω·∇S/ρ，B = 0 时沿流体元守恒"""
    ops = ops or DiffOps(state.grid)
    values = dot(ops.curl(state.u), ops.grad(state.S)) / state.rho
    return ScalarField(state.grid, values, "ertel")


def tracer_subset(grid: Grid, count: int) -> np.ndarray:
    """在标签网格上等间隔取 count 个示踪点的扁平下标"""
    total = int(np.prod(grid.shape))
    count = max(1, min(int(count), total))
    return np.unique(np.linspace(0, total - 1, count).round().astype(int))


class InvariantDrift:
    """
    沿示踪点子集监测不变量相对 t0 值的偏离

    使用示例:
        drift = InvariantDrift(["psi1", "ertel"], grid, count=100)
        drift.record_initial(frame0)
        reports = drift.reports(frame)
    """

    def __init__(self, names: Iterable[str], grid: Grid, count: int = 100):
        self.names = list(names)
        for name in self.names:
            if name not in DRIFT_TAGS:
                raise InvariantConfigError(f"不支持漂移监测的不变量: {name}")
        self.indices = tracer_subset(grid, count)
        self.initial: Dict[str, np.ndarray] = {}

    def _fields(self, frame: Frame) -> Dict[str, np.ndarray]:
        fields = {}
        advected = [n for n in self.names if n in INVARIANT_NAMES]
        if advected:
            for name, f in advected_invariants(frame.state, frame.ops, advected).items():
                fields[name] = f.values
        if "ertel" in self.names:
            fields["ertel"] = ertel_invariant(frame.state, frame.ops).values
        return fields

    def sample(self, frame: Frame) -> Dict[str, np.ndarray]:
        lmap = frame.map
        if lmap is None or frame.interp is None:
            raise InvariantConfigError("漂移监测需要拉格朗日映射与插值器")
        points = lmap.positions.reshape(3, -1)[:, self.indices]
        return {
            name: frame.interp.sample(values, points)
            for name, values in self._fields(frame).items()
        }

    def record_initial(self, frame: Frame) -> None:
        self.initial = self.sample(frame)

    def reports(self, frame: Frame) -> List[ConservationReport]:
        if not self.initial:
            self.record_initial(frame)
        current = self.sample(frame)
        weight = 1.0 / len(self.indices)
        reports = []
        for name in self.names:
            drift = current[name] - self.initial[name]
            reports.append(
                ConservationReport(
                    name=DRIFT_TAGS[name],
                    variant=name,
                    mode=frame.mode,
                    t=frame.t,
                    grid=frame.grid,
                    residual=drift,
                    scale=float(np.max(np.abs(self.initial[name]))),
                    weight=weight,
                    extra={"tracers": int(len(self.indices))},
                )
            )
        return reports
