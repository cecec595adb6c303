"""
恒等式注册表
每个恒等式族是一个 BaseIdentity 子类，IdentitySuite 按 reports.list 选择并逐一求值
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Type

import numpy as np

from app.lagrange import (
    MapFoldingError,
    cofactor_divergence,
    lagrangian_densities,
    map_reconstruct,
    position_gradient,
    reconstruction_mismatch,
)
from app.noether import (
    PV_VARIANTS,
    ConservationReport,
    Frame,
    InvariantDrift,
    canonical_system,
    cheviakov_residual,
    magnetic_system,
    noether_currents,
    pv_residual,
    term_scale,
    vorticity_residuals,
)
from app.relabel import (
    Foliation,
    SymmetryGenerator,
    basis_residuals,
    bianchi_residual,
    construction_residuals,
    determining_residuals,
    generator_consistency,
    multiplier_identity,
    multiplier_pullback,
    multiplier_q_report,
    multipliers_eval,
)
from app.solver import SolverAbort

from .config import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class IdentityContext:
    """一次求值所需的全部上下文"""

    frame: Frame
    psi: str = "psi"
    foliation: Optional[Foliation] = None
    generator: Optional[SymmetryGenerator] = None
    drift: Optional[InvariantDrift] = None
    options: Dict[str, Any] = field(default_factory=dict)

    @property
    def has_map(self) -> bool:
        return self.frame.map is not None

    @property
    def has_psi(self) -> bool:
        return self.psi in self.frame.state.labels


class BaseIdentity(ABC):
    """恒等式族基类"""

    NAME: str = ""
    TAGS: Tuple[str, ...] = ()
    REQUIRES_MAP: bool = False
    REQUIRES_PSI: bool = False
    REQUIRES_GENERATOR: bool = False

    def applicable(self, ctx: IdentityContext) -> bool:
        """auto 模式下是否自动启用"""
        if self.REQUIRES_MAP and not ctx.has_map:
            return False
        if self.REQUIRES_PSI and not ctx.has_psi:
            return False
        if self.REQUIRES_GENERATOR and ctx.generator is None:
            return False
        return True

    @abstractmethod
    def evaluate(self, ctx: IdentityContext) -> List[ConservationReport]:
        """返回该族在当前时刻的全部报告"""


class PvIdentity(BaseIdentity):
    """位势涡度守恒律的三种写法"""

    NAME = "pv"
    TAGS = tuple(PV_VARIANTS.values())
    REQUIRES_PSI = True

    def evaluate(self, ctx: IdentityContext) -> List[ConservationReport]:
        return [pv_residual(ctx.frame, ctx.psi, variant) for variant in PV_VARIANTS]


class CheviakovIdentity(BaseIdentity):
    """
    Cheviakov 守恒律，canonical 系统额外给出与 mhd 写法的逐点对照
    """

    NAME = "cheviakov"
    TAGS = ("eq1.5",)
    REQUIRES_PSI = True

    def evaluate(self, ctx: IdentityContext) -> List[ConservationReport]:
        frame = ctx.frame
        canonical = cheviakov_residual(frame, canonical_system(ctx.psi))
        if not frame.curl_term:
            pv = pv_residual(frame, ctx.psi, "mhd")
            canonical.extra["pv_density_match"] = _relative_gap(canonical.density, pv.density)
            canonical.extra["pv_flux_match"] = _relative_gap(canonical.flux, pv.flux)
        magnetic = cheviakov_residual(frame, magnetic_system(ctx.psi))
        return [canonical, magnetic]


def _relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    scale = term_scale(a, b)
    gap = float(np.max(np.abs(a - b)))
    return gap / scale if scale > 0 else gap


class VorticityIdentity(BaseIdentity):
    NAME = "vorticity"
    TAGS = ("nfa34", "nfa35", "nfa36")
    REQUIRES_PSI = True

    def evaluate(self, ctx: IdentityContext) -> List[ConservationReport]:
        return list(vorticity_residuals(ctx.frame, ctx.psi).values())


class InvariantsIdentity(BaseIdentity):
    """示踪点上的平流不变量漂移"""

    NAME = "invariants"
    TAGS = ("nfa31", "eq1.1")
    REQUIRES_MAP = True

    def applicable(self, ctx: IdentityContext) -> bool:
        return super().applicable(ctx) and ctx.drift is not None

    def evaluate(self, ctx: IdentityContext) -> List[ConservationReport]:
        if ctx.drift is None:
            raise ConfigError("没有配置漂移监测的不变量")
        return ctx.drift.reports(ctx.frame)


class MapIdentity(BaseIdentity):
    """
    映射代数: 冻结重构、F 的差分对照、拉格朗日密度一致性、E 与余子式散度
    """

    NAME = "map"
    TAGS = ("eq2.7", "eq2.8", "eq2.9", "eq2.16", "eq2.19")
    REQUIRES_MAP = True

    def evaluate(self, ctx: IdentityContext) -> List[ConservationReport]:
        frame = ctx.frame
        lmap = frame.require_map()
        geometry = frame.geometry()
        ops = frame.ops
        recon = map_reconstruct(lmap, geometry)
        mismatch = reconstruction_mismatch(recon, lmap, frame.state, frame.interp)
        common = dict(mode=frame.mode, t=frame.t, grid=frame.grid, side="label")

        reports = []
        for variant, tag, key in (("rho", "eq2.7", "rho_map"), ("S", "eq2.7", "S_map"), ("B", "eq2.9", "B_map")):
            reports.append(
                ConservationReport(
                    name=tag,
                    variant=variant,
                    residual=mismatch[variant],
                    scale=term_scale(recon[key]),
                    **common,
                )
            )

        F_diff = position_gradient(lmap, ops)
        reports.append(
            ConservationReport(
                name="eq2.8",
                variant="F",
                residual=lmap.F - F_diff,
                scale=term_scale(lmap.F),
                **common,
            )
        )

        phi = None
        if frame.state.Phi is not None:
            phi = frame.interp.sample(frame.state.Phi, lmap.positions)
        densities = lagrangian_densities(lmap, geometry, frame.eos, phi)
        ell_J = densities["ell"] * geometry.J
        reports.append(
            ConservationReport(
                name="eq2.16",
                residual=densities["ell0"] - ell_J,
                scale=term_scale(densities["ell0"], ell_J),
                **common,
            )
        )

        E = frame.euler_lagrange()
        reports.append(
            ConservationReport(
                name="eq2.19",
                variant="E",
                residual=E,
                scale=term_scale(lmap.rho0 * lmap.accel),
                **common,
            )
        )
        reports.append(
            ConservationReport(
                name="eq2.19",
                variant="cofactor_div",
                residual=cofactor_divergence(geometry, ops),
                scale=term_scale(geometry.A),
                **common,
            )
        )
        return reports


class CurrentsIdentity(BaseIdentity):
    """Noether 流守恒 (欧拉侧) 与标签侧恒等式"""

    NAME = "currents"
    TAGS = ("eq4.35da", "eq4.22")
    REQUIRES_GENERATOR = True

    def evaluate(self, ctx: IdentityContext) -> List[ConservationReport]:
        currents = noether_currents(ctx.frame, ctx.generator)
        reports = currents.reports()
        checks = {
            "flux_check": currents.flux_check,
            "pushforward_check": currents.pushforward_check,
            "generic_path_check": currents.generic_path_check,
        }
        for report in reports:
            report.extra.update({k: v for k, v in checks.items() if np.isfinite(v)})
        return reports


class GeneratorIdentity(BaseIdentity):
    NAME = "generator"
    TAGS = ("eq4.32",)
    REQUIRES_MAP = True
    REQUIRES_GENERATOR = True

    def evaluate(self, ctx: IdentityContext) -> List[ConservationReport]:
        return [generator_consistency(ctx.frame, ctx.generator)]


class DeterminingIdentity(BaseIdentity):
    """李确定方程 (标签侧、欧拉侧) 与散度对称条件"""

    NAME = "determining"
    TAGS = ("eq4.34", "eq4.35a", "eq4.35b", "eq4.35c", "eq4.35aa")
    REQUIRES_GENERATOR = True

    def evaluate(self, ctx: IdentityContext) -> List[ConservationReport]:
        groups = determining_residuals(ctx.frame, ctx.generator)
        return [report for reports in groups.values() for report in reports]


class MultipliersIdentity(BaseIdentity):
    NAME = "multipliers"
    TAGS = ("nfa29", "eq4.38", "eq4.38c")
    REQUIRES_MAP = True
    REQUIRES_PSI = True

    def evaluate(self, ctx: IdentityContext) -> List[ConservationReport]:
        frame = ctx.frame
        multipliers = multipliers_eval(frame, ctx.psi)
        return [
            multiplier_q_report(frame, multipliers),
            multiplier_identity(frame, multipliers, on_shell=True),
            multiplier_identity(frame, multipliers, on_shell=False),
            *multiplier_pullback(frame, multipliers),
        ]


class BianchiIdentity(BaseIdentity):
    """广义 Bianchi 恒等式，两侧各报 on-shell 与 off-shell"""

    NAME = "bianchi"
    TAGS = ("nfa15", "nfa17")
    REQUIRES_PSI = True

    def evaluate(self, ctx: IdentityContext) -> List[ConservationReport]:
        sides = ("label", "euler") if ctx.has_map else ("euler",)
        return [
            bianchi_residual(ctx.frame, ctx.psi, side, on_shell)
            for side in sides
            for on_shell in (True, False)
        ]


FOLIATION_TAGS = {
    "duality": "nfa6",
    "cross_basis": "nfa7",
    "cross_dual": "nfa7",
    "bracket": "nfa3",
}


class FoliationIdentity(BaseIdentity):
    """叶状结构的对偶基、叉积关系、李括号与构造恒等式 (标签空间，不随时间变化)"""

    NAME = "foliation"
    TAGS = ("nfa3", "nfa6", "nfa7", "nfa8")

    def applicable(self, ctx: IdentityContext) -> bool:
        return ctx.foliation is not None

    def evaluate(self, ctx: IdentityContext) -> List[ConservationReport]:
        if ctx.foliation is None:
            raise ConfigError("该场景没有叶状结构")
        frame = ctx.frame
        foliation = ctx.foliation
        common = dict(mode=frame.mode, t=frame.t, grid=frame.grid, side="label")
        reports = [
            ConservationReport(name=FOLIATION_TAGS[variant], variant=variant, residual=values, scale=1.0, **common)
            for variant, values in basis_residuals(foliation, frame.ops).items()
        ]
        scale = term_scale(foliation.rho0V, foliation.B0)
        reports += [
            ConservationReport(name="nfa8", variant=variant, residual=values, scale=scale, **common)
            for variant, values in construction_residuals(foliation, frame.ops).items()
        ]
        return reports


IDENTITIES: Dict[str, Type[BaseIdentity]] = {
    cls.NAME: cls
    for cls in (
        PvIdentity,
        CheviakovIdentity,
        VorticityIdentity,
        InvariantsIdentity,
        MapIdentity,
        CurrentsIdentity,
        GeneratorIdentity,
        DeterminingIdentity,
        MultipliersIdentity,
        BianchiIdentity,
        FoliationIdentity,
    )
}


class IdentitySuite:
    """
    按名称选择的恒等式集合

    使用示例:
        suite = IdentitySuite(["auto"])
        reports, failures = suite.evaluate(ctx)
    """

    def __init__(self, names: List[str]):
        names = list(names) or ["auto"]
        self.auto = "auto" in names
        explicit = [n for n in names if n != "auto"]
        unknown = [n for n in explicit if n not in IDENTITIES]
        if unknown:
            raise ConfigError(f"未知恒等式 {unknown}，可选: {sorted(IDENTITIES)} 或 auto")
        selected = list(IDENTITIES) if self.auto else explicit
        self.identities = [IDENTITIES[name]() for name in selected]
        self.explicit = set(explicit)

    def _active(self, ctx: IdentityContext) -> List[BaseIdentity]:
        active = []
        for identity in self.identities:
            if identity.NAME in self.explicit or identity.applicable(ctx):
                active.append(identity)
            else:
                logger.debug("identity %s skipped: prerequisites missing", identity.NAME)
        return active

    def _evaluate_single(self, identity: BaseIdentity, ctx: IdentityContext) -> Dict[str, Any]:
        try:
            reports = identity.evaluate(ctx)
            return {"success": True, "identity": identity.NAME, "reports": reports}
        except (SolverAbort, MapFoldingError):
            raise
        except Exception as e:
            logger.warning("identity %s failed at t=%.6g: %s", identity.NAME, ctx.frame.t, e)
            return {
                "success": False,
                "identity": identity.NAME,
                "t": float(ctx.frame.t),
                "error": f"{type(e).__name__}: {e}",
            }

    def evaluate(self, ctx: IdentityContext) -> Tuple[List[ConservationReport], List[Dict[str, Any]]]:
        """
        求值全部启用的恒等式

        Returns:
            (报告列表, 失败条目列表)；求解器与映射的中止异常直接向上抛出
        """
        reports: List[ConservationReport] = []
        failures: List[Dict[str, Any]] = []
        for identity in self._active(ctx):
            result = self._evaluate_single(identity, ctx)
            if result["success"]:
                reports.extend(result["reports"])
            else:
                failures.append(result)
        return reports, failures
