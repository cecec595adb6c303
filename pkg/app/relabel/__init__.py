"""
重标记对称模块
叶状结构、生成元、确定方程、乘子与广义 Bianchi 恒等式
"""

from .bianchi import SIDES, bianchi_residual, euler_side, label_side, perturb_acceleration
from .determining import determining_residuals, divergence_symmetry, euler_set, label_set
from .foliation import (
    FOLIATION_PRESETS,
    POTENTIAL_NAMES,
    EntropyClosure,
    Foliation,
    LabelPotential,
    SingularFoliationError,
    basis_checks,
    basis_residuals,
    cartesian_potentials,
    construction_identities,
    construction_residuals,
    curved_potentials,
    foliation_build,
    lie_bracket,
    potential_curl,
)
from .generator import GeneratorMismatchError, SymmetryGenerator, generator_consistency
from .multipliers import (
    Multipliers,
    multiplier_identity,
    multiplier_pullback,
    multiplier_q_report,
    multipliers_eval,
)

__all__ = [
    # 叶状结构
    "LabelPotential",
    "EntropyClosure",
    "Foliation",
    "FOLIATION_PRESETS",
    "POTENTIAL_NAMES",
    "cartesian_potentials",
    "curved_potentials",
    "foliation_build",
    "basis_checks",
    "basis_residuals",
    "construction_identities",
    "construction_residuals",
    "lie_bracket",
    "potential_curl",
    # 生成元与确定方程
    "SymmetryGenerator",
    "generator_consistency",
    "determining_residuals",
    "label_set",
    "euler_set",
    "divergence_symmetry",
    # 乘子与 Bianchi
    "Multipliers",
    "multipliers_eval",
    "multiplier_q_report",
    "multiplier_identity",
    "multiplier_pullback",
    "bianchi_residual",
    "label_side",
    "euler_side",
    "SIDES",
    "perturb_acceleration",
    # 异常
    "SingularFoliationError",
    "GeneratorMismatchError",
]
