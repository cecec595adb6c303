"""
守恒律与 Noether 流模块
广义力、位势涡度、Cheviakov 系统、涡度恒等式、平流不变量与重标记流
"""

from app.solver import UnknownLabelError

from .cheviakov import CheviakovSystem, canonical_system, cheviakov_residual, magnetic_system
from .currents import (
    MissingFoliationError,
    NoetherCurrents,
    eulerian_current,
    gauge_transform,
    label_current,
    noether_currents,
    pushforward_currents,
)
from .force import ForceField, force_F, frame_force
from .frame import MODES, Frame
from .invariants import (
    InvariantConfigError,
    InvariantDrift,
    advected_invariants,
    ertel_invariant,
    tracer_subset,
)
from .pv import PV_VARIANTS, frame_pv, pv_density, pv_flux, pv_residual
from .report import ConservationReport, field_norms, term_scale
from .vorticity import momentum_form_residual, vorticity_residuals

__all__ = [
    # 求值上下文与报告
    "Frame",
    "MODES",
    "ConservationReport",
    "field_norms",
    "term_scale",
    # 广义力与位势涡度
    "ForceField",
    "force_F",
    "frame_force",
    "PV_VARIANTS",
    "pv_density",
    "frame_pv",
    "pv_flux",
    "pv_residual",
    # Cheviakov
    "CheviakovSystem",
    "canonical_system",
    "magnetic_system",
    "cheviakov_residual",
    # 涡度与不变量
    "vorticity_residuals",
    "momentum_form_residual",
    "advected_invariants",
    "ertel_invariant",
    "InvariantDrift",
    "tracer_subset",
    # Noether 流
    "NoetherCurrents",
    "noether_currents",
    "eulerian_current",
    "label_current",
    "pushforward_currents",
    "gauge_transform",
    # 异常
    "UnknownLabelError",
    "MissingFoliationError",
    "InvariantConfigError",
]
