import json
import logging
import math

import numpy as np
import pandas as pd
import pytest

import main
from app.harness import (
    ConfigError,
    IdentityContext,
    IdentitySuite,
    LevelResult,
    RunConfig,
    Runner,
    build_scenario,
    convergence,
    get_scenario,
    order_table,
    pairwise_orders,
    verify,
)
from app.harness.config import THREADS_ENV
from app.harness.convergence import ConvergenceResult, floor_for
from app.harness.runner import RunRecord, report_steps
from app.harness.verify import AcceptanceSuite, VerifyResult, at_least, at_most, derive
from app.numerics import DiffOps
from app.solver import SolverAbort, stable_dt

from .conftest import make_frame

UNIFORM = "grid.nx = 16\ngrid.ny = 16\nscenario.name = uniform\nrun.t_end = 0.05\n"


def small(name, extra=""):
    return RunConfig.from_text(f"grid.nx = 16\ngrid.ny = 16\nscenario.name = {name}\n" + extra)


# ---- 场景 ----


@pytest.mark.parametrize("name", ["uniform", "advection", "shear-alfven", "orszag-tang-25d", "custom-closures"])
def test_every_preset_builds(name):
    setup = build_scenario(small(name))
    assert setup.state.grid.shape == (16, 16, 1)
    assert setup.psi in setup.state.labels
    assert np.all(setup.state.rho > 0)


def test_foliation_presets():
    assert build_scenario(small("uniform")).foliation is not None
    assert build_scenario(small("custom-closures")).foliation is not None
    assert build_scenario(small("advection")).foliation is None


def test_orszag_tang_label_generator_path():
    """foliation = labels: 无叶状结构，生成元由平流标签 ψ, χ 给出，确定方程可在参考算例上求值"""
    config = small(
        "orszag-tang-25d",
        "scenario.foliation = labels\nrun.t_end = 0.02\nreports.list = determining,generator,currents\n",
    )
    runner = Runner(config)
    assert runner.setup.foliation is None
    assert (runner.generator.psi, runner.generator.chi) == ("psi", "chi")
    record = runner.run(write=False)
    assert record.failures == []
    final = record.final()
    assert {"eq4.34:induction:label", "eq4.35b:momentum", "eq4.35aa", "eq4.35da", "eq4.32:label"} <= set(final)
    # 2.5D 下 ∇ψ×∇χ 只有 z 分量，质量与熵两条精确为零
    for key in ("eq4.34:mass:label", "eq4.34:entropy:label", "eq4.35a:mass", "eq4.35a:entropy"):
        assert final[key].norms["Linf"] <= 1e-12 * max(final[key].scale, 1.0), key
    assert final["eq4.35c:induction"].relative > 1e-3


@pytest.mark.parametrize(
    "name, extra",
    [
        ("orszag-tang-25d", "scenario.foliation = cartesian\n"),
        ("orszag-tang-25d", "scenario.foliation = labels\nscenario.labels = psi\n"),
        ("shear-alfven", "eos.mu0 = 2.0\n"),
        ("custom-closures", "scenario.foliation = none\n"),
        ("custom-closures", "scenario.foliation = spiral\n"),
        ("custom-closures", "scenario.entropy_closure = product\n"),
        ("advection", "scenario.labels = chi\n"),
        ("vortex-street", ""),
    ],
)
def test_invalid_scenarios(name, extra):
    with pytest.raises(ConfigError):
        build_scenario(small(name, extra))


def test_ertel_variant_switches_psi():
    setup = build_scenario(small("orszag-tang-25d", "scenario.ertel = true\n"))
    assert setup.psi == "s"
    assert np.all(setup.state.B == 0)
    np.testing.assert_array_equal(setup.state.labels["s"].periodic, setup.state.S)


def test_reports_psi_overrides_default():
    setup = build_scenario(small("orszag-tang-25d", "reports.psi = chi\n"))
    assert setup.psi == "chi"


def test_vector_potential_matches_field():
    config = small("orszag-tang-25d", "scenario.vector_potential = true\n")
    state = build_scenario(config).state
    curl = DiffOps(state.grid).curl(state.A)
    np.testing.assert_allclose(curl, state.B, atol=2e-2)


def test_analytic_error_vanishes_at_start():
    for name in ("advection", "shear-alfven"):
        config = small(name)
        setup = build_scenario(config)
        errors = get_scenario(config).analytic_error(setup.state, config.eos.to_eos())
        assert max(errors.values()) < 1e-14
    config = small("uniform")
    assert get_scenario(config).analytic_error(build_scenario(config).state, config.eos.to_eos()) is None


# ---- 恒等式注册表 ----


def test_unknown_identity_rejected():
    with pytest.raises(ConfigError):
        IdentitySuite(["pv", "bogus"])


def test_auto_skips_identities_without_prerequisites(ot_state, eos):
    ctx = IdentityContext(frame=make_frame(ot_state, eos))
    suite = IdentitySuite(["auto"])
    active = {identity.NAME for identity in suite._active(ctx)}
    assert active == {"pv", "cheviakov", "vorticity", "bianchi"}
    reports, failures = suite.evaluate(ctx)
    assert not failures
    assert {r.name for r in reports} >= {"eq1.2", "eq1.3", "nfa19", "eq1.5", "nfa34", "nfa17"}


def test_explicit_identity_failure_becomes_entry(ot_state, eos):
    ctx = IdentityContext(frame=make_frame(ot_state, eos))
    reports, failures = IdentitySuite(["pv", "map", "foliation"]).evaluate(ctx)
    assert reports
    assert [f["identity"] for f in failures] == ["map", "foliation"]
    assert failures[0]["error"].startswith("InsufficientHistoryError")
    assert failures[1]["error"].startswith("ConfigError")


def test_cheviakov_identity_cross_checks_pv(ot_state, eos):
    ctx = IdentityContext(frame=make_frame(ot_state, eos))
    reports, _ = IdentitySuite(["cheviakov"]).evaluate(ctx)
    canonical = next(r for r in reports if r.key == "eq1.5:canonical")
    assert canonical.extra["pv_density_match"] < 1e-12
    assert canonical.extra["pv_flux_match"] < 1e-12


# ---- 时间循环 ----


def test_report_steps():
    assert report_steps(10, 4) == [0, 4, 8, 10]
    assert report_steps(5, 0) == [0, 5]
    assert report_steps(3, 1) == [0, 1, 2, 3]


def test_uniform_run_stays_at_round_off(tmp_path):
    config = RunConfig.from_text(UNIFORM)
    record = Runner(config).run(tmp_path / "run")
    assert record.failures == []
    assert record.reports
    assert record.worst("Linf").max() < 1e-10
    assert record.energy_drift < 1e-13
    assert record.divB_relative < 1e-13

    out = tmp_path / "run"
    for name in ("summary.csv", "diagnostics.csv", "provenance.json", "timing.txt"):
        assert (out / name).exists(), name
    assert not (out / "analytic.csv").exists()
    files = sorted((out / "reports").glob("*.json"))
    assert len(files) == len({(r.key, step) for r, step in zip(record.reports, record.steps)})
    assert all(":" not in f.name for f in files)
    assert any(f.name.endswith("_t000000.json") for f in files)

    summary = pd.read_csv(out / "summary.csv")
    assert len(summary) == len(record.reports)
    assert set(summary["step"]) == {0, Runner(config).n_steps}

    provenance = json.loads((out / "provenance.json").read_text(encoding="utf-8"))
    assert provenance["config_sha256"] == config.sha256
    assert provenance["scenario"] == "uniform"
    assert "wall_time" not in provenance


def test_run_is_reproducible(tmp_path):
    config = RunConfig.from_text(UNIFORM)
    Runner(config).run(tmp_path / "a")
    Runner(config).run(tmp_path / "b")
    for name in ("summary.csv", "diagnostics.csv", "provenance.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_write_false_leaves_no_files(tmp_path):
    record = Runner(RunConfig.from_text(UNIFORM)).run(tmp_path / "none", write=False)
    assert record.out_dir is None
    assert not (tmp_path / "none").exists()


def test_snapshot_mode_skips_first_level():
    config = RunConfig.from_text(UNIFORM.replace("0.05", "0.3") + "run.mode = snapshot\nreports.list = pv\n")
    runner = Runner(config)
    assert runner.n_steps >= 2
    record = runner.run(write=False)
    assert set(record.steps) == {runner.n_steps}


def test_dt_above_stable_step_warns(caplog):
    config = RunConfig.from_text(UNIFORM + "reports.list = pv\n")
    runner = Runner(config)
    state, eos = runner.setup.state, runner.eos
    runner.dt = 0.5 * (stable_dt(state, eos, config.run.cfl) + stable_dt(state, eos, 1.0))
    runner.n_steps = 1
    runner.report_steps = [0, 1]
    with caplog.at_level(logging.WARNING, logger="app.harness.runner"):
        record = runner.run(write=False)
    assert [w["step"] for w in record.dt_warnings] == [0, 1]
    assert all(w["dt"] > w["stable_dt"] for w in record.dt_warnings)
    assert record.provenance["dt_warnings"] == record.dt_warnings
    assert "exceeds stable_dt" in caplog.text
    assert record.failures == []


def test_dt_above_cfl_one_aborts():
    runner = Runner(RunConfig.from_text(UNIFORM))
    runner.dt = 2.0 * stable_dt(runner.setup.state, runner.eos, 1.0)
    runner.n_steps = 1
    runner.report_steps = [0, 1]
    with pytest.raises(SolverAbort) as info:
        runner.run(write=False)
    assert info.value.field == "dt"


def test_fixed_step_stays_stable_through_run():
    record = Runner(RunConfig.from_text(UNIFORM)).run(write=False)
    assert record.dt_warnings == []


def test_advection_run_writes_analytic_and_dumps(tmp_path):
    config = RunConfig.from_text(
        "grid.nx = 16\ngrid.ny = 16\nscenario.name = advection\nrun.t_end = 0.1\n"
        "reports.list = pv,map\noutput.dumps = true\n"
    )
    record = Runner(config).run(tmp_path)
    assert record.analytic[-1]["label_error_linf"] < 1e-2
    assert (tmp_path / "analytic.csv").exists()
    assert (tmp_path / "dumps" / "rho.bin").exists()
    assert (tmp_path / "dumps" / "tracer_F.bin").exists()


def test_empty_record():
    record = RunRecord(config=RunConfig())
    assert record.worst().empty
    assert record.summary().empty
    assert record.energy_drift == 0.0


# ---- 收敛研究 ----


def test_pairwise_orders():
    orders = pairwise_orders([1.0, 1.0 / 16, 1.0 / 256])
    np.testing.assert_allclose(orders, [4.0, 4.0])
    assert all(math.isnan(o) for o in pairwise_orders([1e-3, 2e-3, 0.0]))


def levels_with(key, errors, scale=1.0):
    return [
        LevelResult(n=16 * 2**k, norms={key: {"L2": e, "Linf": e}}, scales={key: scale})
        for k, e in enumerate(errors)
    ]


def test_order_table_verdicts():
    config = RunConfig()
    fourth = [1e-2, 1e-2 / 16, 1e-2 / 256]
    second = [1e-2, 1e-2 / 4, 1e-2 / 16]
    cases = {
        "pass": levels_with("eq1.3:mhd", fourth),
        "fail": levels_with("eq1.3:mhd", second),
        "n/a": levels_with("custom:none", fourth),
        "noise": levels_with("eq1.3:mhd", [1e-14, 2e-14, 1e-14]),
    }
    for verdict, levels in cases.items():
        table = order_table(levels, config)
        assert table["verdict"].tolist() == [verdict]
    table = order_table(cases["pass"], config)
    assert table["order_fit"].iloc[0] == pytest.approx(4.0, rel=1e-6)
    assert {"Linf_n16", "Linf_n64", "order_16_32", "order_32_64"} <= set(table.columns)


def test_floor_lookup_and_override():
    config = RunConfig()
    assert floor_for("eq1.3:mhd", config) == 3.5
    assert floor_for("nfa31:psi1", config) is None
    config = RunConfig.from_text("grid.nx = 16\ngrid.ny = 16\nconvergence.floor.eq1.3 = 2.0\n")
    assert floor_for("eq1.3:mhd", config) == 2.0
    table = order_table(levels_with("eq1.3:mhd", [1e-2, 1e-2 / 4, 1e-2 / 16]), config)
    assert table["verdict"].tolist() == ["pass"]


def test_convergence_result_exit_code():
    assert ConvergenceResult(pd.DataFrame({"verdict": ["pass", "noise"]}), []).exit_code == 0
    assert ConvergenceResult(pd.DataFrame({"verdict": ["pass", "fail"]}), []).exit_code == 1
    assert ConvergenceResult(pd.DataFrame(), []).exit_code == 0


@pytest.mark.slow
def test_uniform_convergence_is_noise(monkeypatch, tmp_path):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    result = convergence(RunConfig.from_text(UNIFORM), 2, tmp_path)
    assert [level.n for level in result.levels] == [16, 32]
    assert set(result.table["verdict"]) == {"noise"}
    assert result.exit_code == 0
    assert (tmp_path / "convergence.csv").exists()
    assert (tmp_path / "level_16x16x1" / "summary.csv").exists()
    assert (tmp_path / "level_32x32x1" / "summary.csv").exists()


def test_convergence_needs_two_levels():
    with pytest.raises(ValueError):
        convergence(RunConfig.from_text(UNIFORM), 1)


# ---- 验收套件 ----


def test_verdict_helpers():
    assert at_most("c", "i", 1.0, 2.0).passed
    assert not at_most("c", "i", 3.0, 2.0).passed
    assert at_least("c", "i", 4.0, 3.5).passed
    assert not at_least("c", "i", float("nan"), 3.5).passed
    assert at_least("c", "i", 4.0, 3.5).to_dict()["verdict"] == "PASS"


def test_derive_copies_sections():
    base = RunConfig.from_text(UNIFORM)
    derived = derive(base, scenario={"name": "advection"}, run={"t_end": 0.2})
    assert derived.scenario.name == "advection"
    assert derived.run.t_end == 0.2
    assert base.scenario.name == "uniform"
    assert derived.text == ""
    with pytest.raises(ConfigError):
        derive(base, run={"cfl": 2.0})


def test_verify_result_exit_code():
    passing = VerifyResult([at_most("c", "i", 0.0, 1.0)])
    assert passing.exit_code == 0
    assert VerifyResult([at_most("c", "i", 2.0, 1.0)]).exit_code == 1
    assert VerifyResult([], [{"criterion": "c", "error": "boom"}]).exit_code == 1
    assert list(passing.table().columns) == ["criterion", "identity", "value", "relation", "threshold", "verdict"]


def test_relaxation_on_coarse_grids():
    config = RunConfig.from_text("grid.nx = 16\ngrid.ny = 16\nverify.base_n = 32\n")
    assert AcceptanceSuite(config).relax == pytest.approx(16.0)
    assert AcceptanceSuite(RunConfig()).relax == 1.0


def test_off_shell_norms_under_perturbed_acceleration():
    suite = AcceptanceSuite(RunConfig.from_text("grid.nx = 16\ngrid.ny = 16\nverify.base_n = 32\n"))
    norms = suite.off_shell(32)
    for name in ("nfa15", "eq4.38"):
        assert norms[f"{name}:on-shell"] > 0.05, name
        assert norms[f"{name}:off-shell"] < 0.1 * norms[f"{name}:on-shell"], name


def test_unknown_criterion_rejected():
    with pytest.raises(ConfigError):
        verify(RunConfig(), only=["nonsense"])


def test_equilibrium_and_determinism_criteria():
    config = RunConfig.from_text("grid.nx = 16\ngrid.ny = 16\nverify.base_n = 32\n")
    seen = []
    result = verify(config, only=["equilibrium", "determinism"], progress=seen.append)
    assert seen == ["equilibrium", "determinism"]
    assert not result.errors
    assert result.verdicts
    assert result.passed
    assert {v.criterion for v in result.verdicts} == {"equilibrium", "determinism"}


# ---- 命令行 ----


def test_run_command(tmp_path, capsys):
    path = tmp_path / "uniform.cfg"
    path.write_text(UNIFORM + "reports.list = pv,foliation\n", encoding="utf-8")
    assert main.run_command(path, tmp_path / "out") == 0
    printed = capsys.readouterr().out
    assert "[DONE]" in printed
    assert (tmp_path / "out" / "summary.csv").exists()


def test_bad_config_exits_with_code_two(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("grid.nx = 16\ngrid.what = 1\n", encoding="utf-8")
    with pytest.raises(SystemExit) as info:
        main.run_command(path)
    assert info.value.code == 2
    assert "第 2 行" in capsys.readouterr().out
