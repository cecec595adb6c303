"""
运行编排
求解器与拉格朗日映射同步推进，按输出节奏求值恒等式并写出报告、诊断与溯源信息
"""

import logging
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from app.lagrange import FieldSampler, LagrangianMap, advance_map, sync_map
from app.noether import ConservationReport, Frame, InvariantDrift
from app.numerics import DiffOps, PeriodicInterpolator
from app.relabel import SymmetryGenerator
from app.solver import (
    DiagnosticsLog,
    MhdState,
    RK4Stepper,
    SolverAbort,
    fixed_step,
    mhd_rhs,
    stable_dt,
    write_json,
    write_raster,
)

from .config import RunConfig
from .identities import IdentityContext, IdentitySuite
from .scenarios import ScenarioSetup, build_scenario, get_scenario

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["key", "name", "variant", "side", "step", "t", "L2", "Linf", "scale", "relative"]


def code_version() -> str:
    try:
        return metadata.version("mhd-invariants")
    except metadata.PackageNotFoundError:
        return "unknown"


def report_filename(report: ConservationReport, step: int) -> str:
    return f"{report.key.replace(':', '_')}_t{step:06d}.json"


@dataclass
class RunRecord:
    """一次运行的全部结果"""

    config: RunConfig
    reports: List[ConservationReport] = field(default_factory=list)
    steps: List[int] = field(default_factory=list)
    failures: List[Dict[str, Any]] = field(default_factory=list)
    # 报告时刻 dt 超过当前 stable_dt 的记录
    dt_warnings: List[Dict[str, float]] = field(default_factory=list)
    diagnostics: Optional[pd.DataFrame] = None
    analytic: List[Dict[str, float]] = field(default_factory=list)
    provenance: Dict[str, Any] = field(default_factory=dict)
    out_dir: Optional[Path] = None
    # max ∇·B 相对 max|B|/h
    divB_relative: float = 0.0

    def add(self, reports: List[ConservationReport], step: int) -> None:
        self.reports.extend(reports)
        self.steps.extend([step] * len(reports))

    def summary(self) -> pd.DataFrame:
        """每条报告一行"""
        rows = [
            {
                "key": r.key,
                "name": r.name,
                "variant": r.variant,
                "side": r.side or "",
                "step": step,
                "t": float(r.t),
                "L2": r.norms["L2"],
                "Linf": r.norms["Linf"],
                "scale": float(r.scale),
                "relative": r.relative,
            }
            for r, step in zip(self.reports, self.steps)
        ]
        return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)

    def final(self) -> Dict[str, ConservationReport]:
        """每个报告键在最后一个报告时刻的报告"""
        latest: Dict[str, ConservationReport] = {}
        for report in self.reports:
            current = latest.get(report.key)
            if current is None or report.t >= current.t:
                latest[report.key] = report
        return latest

    def at_step(self, step: int) -> Dict[str, ConservationReport]:
        return {r.key: r for r, s in zip(self.reports, self.steps) if s == step}

    def worst(self, column: str = "relative") -> pd.Series:
        """各报告键在全部时刻上的最大值"""
        table = self.summary()
        if table.empty:
            return pd.Series(dtype=float)
        return table.groupby("key")[column].max()

    @property
    def energy_drift(self) -> float:
        if self.diagnostics is None or self.diagnostics.empty:
            return 0.0
        energy = self.diagnostics["total_energy"].to_numpy()
        return float(np.max(np.abs(energy - energy[0])) / abs(energy[0]))

    @property
    def max_divergence(self) -> float:
        if self.diagnostics is None or self.diagnostics.empty:
            return 0.0
        return float(self.diagnostics["divB_norm"].max())


def report_steps(n_steps: int, cadence: int) -> List[int]:
    """t0、每 cadence 步与最后一步"""
    steps = {0, n_steps}
    if cadence > 0:
        steps.update(range(0, n_steps + 1, cadence))
    return sorted(steps)


def build_generator(setup: ScenarioSetup, config: RunConfig) -> Optional[SymmetryGenerator]:
    if setup.foliation is not None:
        generator = SymmetryGenerator.from_foliation(setup.foliation)
    elif setup.generator_labels is not None:
        psi, chi = setup.generator_labels
        generator = SymmetryGenerator(psi=psi, chi=chi)
    else:
        return None
    missing = [n for n in (generator.psi, generator.chi) if n not in setup.state.labels]
    if missing:
        logger.warning("labels %s not carried, relabelling generator disabled", missing)
        return None
    epsilon = config.reports.generator_perturbation
    if epsilon:
        logger.info("generator perturbed by epsilon=%g (mutation control)", epsilon)
        generator = generator.perturbed(epsilon)
    return generator


def drift_names(state: MhdState, config: RunConfig) -> List[str]:
    names = ["psi1"]
    if state.A is not None:
        names += ["psi2", "psi3"]
    if config.scenario.ertel:
        names.append("ertel")
    return names


class Runner:
    """
    一次运行的时间推进循环

    使用示例:
        record = Runner(config).run(out_dir="outputs/run")
    """

    def __init__(self, config: RunConfig):
        config.validate()
        self.config = config
        self.setup = build_scenario(config)
        self.scenario = get_scenario(config)
        state = self.setup.state
        self.grid = state.grid
        self.eos = config.eos.to_eos()
        self.ops = DiffOps(self.grid)
        self.interp = PeriodicInterpolator(self.grid, config.run.interp_order)
        self.stepper = RK4Stepper(self.eos, self.ops)
        self.suite = IdentitySuite(config.reports.list)
        self.generator = build_generator(self.setup, config)
        self.drift = InvariantDrift(drift_names(state, config), self.grid, config.run.tracer_samples)
        self.diagnostics = DiagnosticsLog(self.eos, self.ops)

        self.dt = fixed_step(config.run.t_end, stable_dt(state, self.eos, config.run.cfl))
        self.n_steps = int(round(config.run.t_end / self.dt))
        self.report_steps = report_steps(self.n_steps, config.run.cadence)

    def initial_frame(self) -> Frame:
        """t0 时刻的求值上下文，映射为已同步的恒等映射"""
        state = self.setup.state
        return self._frame(state, LagrangianMap.from_state(state))

    def _frame(self, state: MhdState, lmap: LagrangianMap) -> Frame:
        tendency = mhd_rhs(state, self.eos, self.ops)
        lmap = sync_map(lmap, state, tendency, self.ops, self.interp)
        return Frame(
            state=state,
            tendency=tendency,
            eos=self.eos,
            ops=self.ops,
            interp=self.interp,
            map=lmap,
            mode=self.config.run.mode,
            lorentz_sign=self.config.debug.lorentz_sign,
            curl_term=self.config.reports.curl_term,
        )

    def _divB_relative(self, row: Dict[str, float], state: MhdState) -> float:
        B_max = float(np.max(np.abs(state.B)))
        if B_max == 0.0:
            return row["divB_norm"]
        return row["divB_norm"] * self.grid.min_spacing / B_max

    def _check_dt(self, state: MhdState, step: int, record: RunRecord) -> None:
        """固定步长超过当前 CFL 步长时告警，超过 cfl = 1 的上限时中止"""
        limit = stable_dt(state, self.eos, self.config.run.cfl)
        if self.dt <= limit:
            return
        hard = stable_dt(state, self.eos, 1.0)
        if self.dt > hard:
            raise SolverAbort(
                f"t={state.t:.6g} 时 dt={self.dt:.6g} 超过 cfl=1 的稳定步长 {hard:.6g}", "dt"
            )
        logger.warning("step %d t=%.6g: dt=%.6g exceeds stable_dt=%.6g", step, state.t, self.dt, limit)
        record.dt_warnings.append({"step": step, "t": float(state.t), "dt": self.dt, "stable_dt": limit})

    def _evaluate(self, frame: Frame, step: int, record: RunRecord) -> None:
        ctx = IdentityContext(
            frame=frame,
            psi=self.setup.psi,
            foliation=self.setup.foliation,
            generator=self.generator,
            drift=self.drift,
        )
        reports, failures = self.suite.evaluate(ctx)
        record.add(reports, step)
        for failure in failures:
            failure["step"] = step
        record.failures.extend(failures)
        errors = self.scenario.analytic_error(frame.state, self.eos)
        if errors is not None:
            record.analytic.append({"step": step, "t": float(frame.t), **errors})
        logger.info("step %d t=%.6g: %d reports, %d failures", step, frame.t, len(reports), len(failures))

    def run(self, out_dir: Optional[Union[str, Path]] = None, write: bool = True) -> RunRecord:
        """
        执行时间循环

        Args:
            out_dir: 输出目录，None 时取 output.dir
            write: 为 False 时只返回结果不写文件

        Returns:
            RunRecord
        """
        started = time.perf_counter()
        config = self.config
        record = RunRecord(config=config)
        snapshot = config.run.mode == "snapshot"
        last = self.n_steps + 1 if snapshot else self.n_steps
        logger.info(
            "run %s: dt=%.6g steps=%d mode=%s report_steps=%s",
            config.scenario.name,
            self.dt,
            self.n_steps,
            config.run.mode,
            self.report_steps,
        )

        frame = self.initial_frame()
        self.drift.record_initial(frame)
        window: List[Frame] = []

        for step in range(last + 1):
            if step <= self.n_steps:
                row = self.diagnostics.record(frame.state)
                record.divB_relative = max(record.divB_relative, self._divB_relative(row, frame.state))
                if step in self.report_steps:
                    self._check_dt(frame.state, step, record)
            window = (window + [frame])[-3:]
            if not snapshot and step in self.report_steps:
                self._evaluate(frame, step, record)
            if snapshot and step >= 2 and step - 1 in self.report_steps:
                previous, centre, following = window
                centre.previous = previous
                centre.following = following
                self._evaluate(centre, step - 1, record)
            if step == last:
                break

            new_state = self.stepper.step(frame.state, self.dt)
            sampler = FieldSampler(self.stepper.stages, self.ops, self.interp)
            lmap = advance_map(frame.map, sampler, self.dt)
            frame = self._frame(new_state, lmap)

        if snapshot and 0 in self.report_steps:
            logger.info("snapshot mode: t0 has no previous level, step 0 not reported")

        record.diagnostics = self.diagnostics.to_frame()
        record.provenance = {
            "config_sha256": config.sha256,
            "config_source": config.source,
            "code_version": code_version(),
            "scenario": config.scenario.name,
            "grid": self.grid.describe(),
            "dt": self.dt,
            "dt_warnings": record.dt_warnings,
            "steps": self.n_steps,
            "report_steps": self.report_steps,
            "mode": config.run.mode,
            "divB_relative": record.divB_relative,
            "energy_drift": record.energy_drift,
        }
        wall_time = time.perf_counter() - started
        record.provenance["wall_time"] = wall_time
        if write:
            record.out_dir = write_outputs(record, Path(out_dir or config.output.dir), frame)
        return record


def write_outputs(record: RunRecord, out_dir: Path, final_frame: Optional[Frame] = None) -> Path:
    """
    写出报告、汇总表、诊断与溯源信息

    除 timing.txt 外的全部文件只依赖配置，可逐字节复现。
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    reports_dir = out_dir / "reports"
    for report, step in zip(record.reports, record.steps):
        write_json(reports_dir / report_filename(report, step), report.to_dict())

    record.summary().to_csv(out_dir / "summary.csv", index=False, float_format="%.17g")
    if record.diagnostics is not None:
        record.diagnostics.to_csv(out_dir / "diagnostics.csv", index=False, float_format="%.17g")
    if record.analytic:
        pd.DataFrame(record.analytic).to_csv(out_dir / "analytic.csv", index=False, float_format="%.17g")
    if record.failures:
        write_json(out_dir / "failures.json", record.failures)

    provenance = {k: v for k, v in record.provenance.items() if k != "wall_time"}
    provenance["config"] = record.config.to_dict()
    write_json(out_dir / "provenance.json", provenance)
    (out_dir / "timing.txt").write_text(
        f"run.wall_time = {record.provenance.get('wall_time', 0.0):.3f}\n", encoding="utf-8"
    )

    if record.config.output.dumps and final_frame is not None:
        _write_dumps(out_dir / "dumps", final_frame)
    return out_dir


def _write_dumps(directory: Path, frame: Frame) -> None:
    state = frame.state
    grid = state.grid
    for name, values in state.arrays():
        write_raster(directory / f"{name.replace(':', '_')}.bin", name.replace(":", "_"), grid, values, state.t)
    if frame.map is not None:
        write_raster(directory / "tracer_x.bin", "tracer_x", grid, frame.map.positions, frame.map.t)
        write_raster(directory / "tracer_F.bin", "tracer_F", grid, frame.map.F, frame.map.t)


def run(
    config: Union[RunConfig, str, Path],
    out_dir: Optional[Union[str, Path]] = None,
    write: bool = True,
) -> RunRecord:
    """按配置文件或配置对象执行一次运行"""
    if not isinstance(config, RunConfig):
        config = RunConfig.from_file(config)
    return Runner(config).run(out_dir, write)
