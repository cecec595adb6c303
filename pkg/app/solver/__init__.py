"""
MHD 求解器模块
状态、右端项、RK4、CFL、诊断与输出
"""

from .diagnostics import DiagnosticsLog, energy_density, global_diagnostics
from .io import read_raster, write_json, write_raster
from .rhs import label_tendency, material_acceleration, mhd_rhs
from .state import Label, MhdState, SolverAbort, Tendency, UnknownLabelError
from .stepper import RK4Stepper, fixed_step, rk4_step, signal_speed, stable_dt

__all__ = [
    # 状态
    "MhdState",
    "Tendency",
    "Label",
    # 推进
    "mhd_rhs",
    "label_tendency",
    "material_acceleration",
    "RK4Stepper",
    "rk4_step",
    "stable_dt",
    "signal_speed",
    "fixed_step",
    # 诊断与输出
    "global_diagnostics",
    "energy_density",
    "DiagnosticsLog",
    "write_raster",
    "read_raster",
    "write_json",
    # 异常
    "SolverAbort",
    "UnknownLabelError",
]
