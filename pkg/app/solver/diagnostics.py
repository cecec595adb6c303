"""
全局诊断量与时间序列
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from app.numerics import DiffOps
from app.numerics.algebra import dot, norm2
from app.thermo import EquationOfState

from .state import MhdState

logger = logging.getLogger(__name__)

DIAGNOSTIC_COLUMNS = ["t", "total_mass", "total_energy", "cross_helicity", "divB_norm"]


def energy_density(state: MhdState, eos: EquationOfState) -> np.ndarray:
    """½ρ|u|² + ε + B²/2μ0 + ρΦ"""
    eps = eos.evaluate(state.rho, state.S).eps
    density = 0.5 * state.rho * norm2(state.u) + eps + norm2(state.B) / (2.0 * eos.mu0)
    if state.Phi is not None:
        density = density + state.rho * state.Phi
    return density


def global_diagnostics(
    state: MhdState, eos: EquationOfState, ops: Optional[DiffOps] = None
) -> Dict[str, float]:
    """
    周期网格上的区域积分 (中点规则) 与 ∇·B 的 L∞

    Returns:
        {"total_mass", "total_energy", "cross_helicity", "divB_norm"}
    """
    ops = ops or DiffOps(state.grid)
    dV = state.grid.cell_volume
    return {
        "total_mass": float(np.sum(state.rho) * dV),
        "total_energy": float(np.sum(energy_density(state, eos)) * dV),
        "cross_helicity": float(np.sum(dot(state.u, state.B)) * dV),
        "divB_norm": float(np.max(np.abs(ops.div(state.B)))),
    }


class DiagnosticsLog:
    """按输出节奏累积诊断量，导出为 CSV"""

    def __init__(self, eos: EquationOfState, ops: DiffOps):
        self.eos = eos
        self.ops = ops
        self.rows: List[Dict[str, float]] = []

    def record(self, state: MhdState) -> Dict[str, float]:
        row = {"t": float(state.t), **global_diagnostics(state, self.eos, self.ops)}
        self.rows.append(row)
        logger.debug("diagnostics t=%.6g E=%.12e divB=%.3e", row["t"], row["total_energy"], row["divB_norm"])
        return row

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=DIAGNOSTIC_COLUMNS)

    def energy_drift(self) -> float:
        """总能量相对漂移 max|E - E0| / |E0|"""
        if not self.rows:
            return 0.0
        energy = self.to_frame()["total_energy"].to_numpy()
        return float(np.max(np.abs(energy - energy[0])) / abs(energy[0]))

    def max_divergence(self) -> float:
        if not self.rows:
            return 0.0
        return float(self.to_frame()["divB_norm"].max())

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path
