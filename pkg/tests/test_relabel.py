import math
from dataclasses import replace

import numpy as np
import pytest

from app.harness import RunConfig, Runner, build_scenario
from app.harness.verify import acceleration_perturbation
from app.lagrange import InsufficientHistoryError
from app.noether import MissingFoliationError, gauge_transform, noether_currents, pv_residual
from app.numerics import DiffOps, Grid
from app.relabel import (
    EntropyClosure,
    GeneratorMismatchError,
    LabelPotential,
    SingularFoliationError,
    SymmetryGenerator,
    basis_checks,
    bianchi_residual,
    cartesian_potentials,
    construction_identities,
    curved_potentials,
    determining_residuals,
    foliation_build,
    generator_consistency,
    lie_bracket,
    multiplier_identity,
    multiplier_pullback,
    multiplier_q_report,
    multipliers_eval,
    perturb_acceleration,
    potential_curl,
)

from .conftest import make_frame, orszag_tang_state


def closures_setup(n=16, perturbation=0.0):
    config = RunConfig.from_text(
        f"grid.nx = {n}\ngrid.ny = {n}\nscenario.name = custom-closures\nscenario.foliation = curved\n"
    )
    setup = build_scenario(config)
    generator = SymmetryGenerator.from_foliation(setup.foliation)
    if perturbation:
        generator = generator.perturbed(perturbation)
    frame = make_frame(setup.state, config.eos.to_eos(), with_map=True)
    return setup, generator, frame


def build(potentials, grid, closure=None):
    closure = closure or EntropyClosure("uniform")
    return foliation_build(potentials["phi"], potentials["chi"], potentials["psi"], closure, grid)


def test_cartesian_foliation(grid, ops):
    foliation = build(cartesian_potentials(), grid)
    np.testing.assert_allclose(foliation.rho0, 1.0)
    np.testing.assert_allclose(foliation.V[0], 1.0)
    np.testing.assert_allclose(foliation.b0[1], 1.0)
    assert max(basis_checks(foliation, ops).values()) < 1e-13
    assert max(construction_identities(foliation, ops).values()) < 1e-13


def test_curved_foliation_has_unit_density(grid, ops):
    foliation = build(curved_potentials(0.1), grid, EntropyClosure("chi", amplitude=0.1))
    np.testing.assert_allclose(foliation.rho0, 1.0, atol=1e-14)
    checks = basis_checks(foliation, ops)
    assert checks["duality_err"] < 1e-2
    assert checks["metric_consistency_err"] < 1e-2


def test_curved_construction_curl_forms(grid, ops):
    identities = construction_identities(build(curved_potentials(0.1), grid), ops)
    assert identities["div_rho0V_curl_form"] < 1e-12
    assert identities["div_B0_curl_form"] < 1e-12


def test_singular_foliation(grid):
    same = LabelPotential("x", ramp=(1.0, 0.0, 0.0))
    with pytest.raises(SingularFoliationError):
        foliation_build(same, same, LabelPotential("z", ramp=(0.0, 0.0, 1.0)), EntropyClosure("uniform"), grid)


def test_closure_on_inactive_axis(grid):
    with pytest.raises(ValueError):
        build(curved_potentials(0.1), grid, EntropyClosure("product"))


def test_unknown_closure():
    with pytest.raises(ValueError):
        EntropyClosure("quadratic")


def test_lie_bracket_of_shear_fields():
    grid = Grid(32, 32, 1)
    ops = DiffOps(grid)
    x = grid.coords()[0]
    b0 = grid.zeros(3)
    b0[0] = 1.0
    V = grid.zeros(3)
    V[1] = np.sin(x)
    bracket = lie_bracket(b0, V, ops)
    assert np.max(np.abs(bracket[1] - np.cos(x))) < 1e-4
    np.testing.assert_array_equal(bracket[0], 0.0)


def test_potential_curl_is_solenoidal(grid, ops):
    labels = {name: p.as_label(grid) for name, p in curved_potentials(0.2).items()}
    mean, potential, field = potential_curl(labels["psi"], labels["phi"], ops)
    np.testing.assert_allclose(mean, [0.0, 1.0, 0.0])
    assert np.max(np.abs(ops.div(field))) < 1e-12


def test_generator_consistent_at_start():
    _, generator, frame = closures_setup()
    report = generator_consistency(frame, generator)
    assert report.key == "eq4.32:label"
    assert report.norms["Linf"] <= 1e-12 * max(report.scale, 1.0)


def test_generator_label_mismatch(ot_state):
    with pytest.raises(GeneratorMismatchError):
        SymmetryGenerator(psi="missing").check_labels(ot_state)


def test_determining_keys():
    _, generator, frame = closures_setup()
    residuals = determining_residuals(frame, generator)
    keys = {r.key for group in residuals.values() for r in group}
    assert {
        "eq4.34:mass:label",
        "eq4.34:entropy:label",
        "eq4.34:drift:label",
        "eq4.34:induction:label",
        "eq4.35a:mass",
        "eq4.35a:entropy",
        "eq4.35b:momentum",
        "eq4.35b:momentum_vector",
        "eq4.35c:induction",
        "eq4.35aa",
    } == keys


def test_determining_detects_perturbed_generator():
    _, honest, frame = closures_setup(32)
    _, mutated, _ = closures_setup(32, perturbation=0.1)

    def momentum(generator):
        reports = determining_residuals(frame, generator)["euler_set"]
        return next(r for r in reports if r.key == "eq4.35b:momentum").relative

    assert momentum(mutated) > 1e-2
    assert momentum(mutated) > 10 * momentum(honest)


def test_multipliers_pull_back_at_start():
    _, _, frame = closures_setup()
    multipliers = multipliers_eval(frame)
    assert multipliers.q_mismatch < 1e-12
    assert multiplier_q_report(frame, multipliers).key == "nfa29:Q:label"
    for report in multiplier_pullback(frame, multipliers):
        assert report.name == "eq4.38c"
        assert report.norms["Linf"] <= 1e-12 * max(report.scale, 1.0), report.variant


def test_multiplier_identity_variants():
    _, _, frame = closures_setup()
    multipliers = multipliers_eval(frame)
    on_shell = multiplier_identity(frame, multipliers, on_shell=True)
    off_shell = multiplier_identity(frame, multipliers)
    assert on_shell.key == "eq4.38:on-shell:label"
    assert off_shell.key == "eq4.38:off-shell:label"
    # t0 时 F = I，两种形式只差 -E
    np.testing.assert_allclose(
        off_shell.residual - on_shell.residual,
        -frame.euler_lagrange(),
        atol=1e-12 * max(off_shell.scale, 1.0),
    )
    assert on_shell.relative < 1e-1
    assert off_shell.relative < 1e-1


def test_euler_bianchi_is_fullF_law(ot_state, eos):
    frame = make_frame(ot_state, eos)
    bianchi = bianchi_residual(frame, "psi", side="euler")
    full = pv_residual(frame, "psi", "fullF")
    assert bianchi.key == "nfa17:on-shell:euler"
    np.testing.assert_array_equal(bianchi.residual, full.residual)
    off_shell = bianchi_residual(frame, "psi", side="euler", on_shell=False)
    assert off_shell.key == "nfa17:off-shell:euler"
    assert off_shell.relative < 1e-1

    # 倾向量 u_t 叠加 δ：on-shell 变为 O(δ)，off-shell 逐点不变
    delta = acceleration_perturbation(ot_state.grid, 0.1)
    shifted = replace(frame, tendency=replace(frame.tendency, u=frame.tendency.u + delta), _cache={})
    shifted_on = bianchi_residual(shifted, "psi", side="euler")
    shifted_off = bianchi_residual(shifted, "psi", side="euler", on_shell=False)
    assert np.max(np.abs(shifted_on.residual - bianchi.residual)) > 0.05
    np.testing.assert_allclose(
        shifted_off.residual, off_shell.residual, atol=1e-12 * max(shifted_off.scale, 1.0)
    )


def test_label_bianchi_needs_map(ot_state, eos):
    with pytest.raises(InsufficientHistoryError):
        bianchi_residual(make_frame(ot_state, eos), "psi", side="label")
    frame = make_frame(ot_state, eos, with_map=True)
    report = bianchi_residual(frame, "psi", side="label")
    assert report.key == "nfa15:on-shell:label"
    assert report.relative < 1e-1
    with pytest.raises(ValueError):
        bianchi_residual(frame, "psi", side="both")


@pytest.mark.parametrize("n, ratio", [(16, 0.5), (32, 0.1)])
def test_off_shell_cancels_perturbed_acceleration(eos, n, ratio):
    """示踪点加速度叠加 0.1 量级扰动：on-shell 随之变为 O(0.1)，off-shell 仍在截断误差"""
    grid = Grid(n, n, 1)
    frame = perturb_acceleration(
        make_frame(orszag_tang_state(grid, eos), eos, with_map=True), acceleration_perturbation(grid, 0.1)
    )
    multipliers = multipliers_eval(frame)
    label_on = bianchi_residual(frame, "psi", side="label").norms["Linf"]
    label_off = bianchi_residual(frame, "psi", side="label", on_shell=False).norms["Linf"]
    identity_on = multiplier_identity(frame, multipliers, on_shell=True).norms["Linf"]
    identity_off = multiplier_identity(frame, multipliers).norms["Linf"]
    assert label_on > 0.05
    assert identity_on > 0.05
    assert label_off < ratio * label_on
    assert identity_off < ratio * identity_on


def test_off_shell_residual_converges_under_perturbation(eos):
    norms = {"nfa15": [], "eq4.38": []}
    for n in (16, 32):
        grid = Grid(n, n, 1)
        frame = perturb_acceleration(
            make_frame(orszag_tang_state(grid, eos), eos, with_map=True), acceleration_perturbation(grid, 0.1)
        )
        norms["nfa15"].append(bianchi_residual(frame, "psi", side="label", on_shell=False).norms["Linf"])
        norms["eq4.38"].append(multiplier_identity(frame, multipliers_eval(frame)).norms["Linf"])
    for name, (coarse, fine) in norms.items():
        assert observed_order(coarse, fine) >= 3.0, name
    assert norms["nfa15"][1] < 5e-2 * 0.1


def test_noether_currents_agree_at_start():
    _, generator, frame = closures_setup()
    currents = noether_currents(frame, generator)
    assert [r.key for r in currents.reports()] == ["eq4.35da", "eq4.22:label"]
    assert currents.flux_check < 1e-12
    assert currents.pushforward_check < 1e-10
    assert currents.generic_path_check < 1e-10


def test_currents_need_generator(ot_state, eos):
    with pytest.raises(MissingFoliationError):
        noether_currents(make_frame(ot_state, eos), None)


def test_zero_gauge_pushes_forward_to_zero():
    _, _, frame = closures_setup()
    gauge = gauge_transform(np.zeros((4,) + frame.grid.shape), frame.map, frame.geometry().J)
    np.testing.assert_array_equal(gauge, 0.0)


# ---- 演化后的网格加密 ----

ORDER = 3.0
# 精确为零 (离散恒等式) 的残差按相对量级判定
EXACT = 1e-11


def observed_order(coarse, fine):
    return math.log2(coarse / fine) if fine > 0 else math.inf


def evolved_final(n, reports, scenario=""):
    config = RunConfig.from_text(f"grid.nx = {n}\ngrid.ny = {n}\nrun.t_end = 0.05\nreports.list = {reports}\n" + scenario)
    record = Runner(config).run(write=False)
    assert record.failures == []
    return record.final()


def assert_order(key, coarse, fine, scale=1.0):
    if fine <= EXACT * max(scale, 1.0):
        return
    assert observed_order(coarse, fine) >= ORDER, f"{key}: {coarse:.3e} -> {fine:.3e}"


def assert_converges(levels, key):
    coarse, fine = (level[key] for level in levels)
    assert fine.t > 0
    assert_order(key, coarse.norms["Linf"], fine.norms["Linf"], fine.scale)


@pytest.fixture(scope="module")
def closures_levels():
    scenario = "scenario.name = custom-closures\nscenario.foliation = curved\n"
    return [evolved_final(n, "currents,determining,generator,multipliers", scenario) for n in (16, 32)]


@pytest.fixture(scope="module")
def reference_levels():
    return [evolved_final(n, "map,bianchi") for n in (16, 32)]


@pytest.mark.slow
def test_euler_lagrange_residual_converges(reference_levels):
    assert_converges(reference_levels, "eq2.19:E:label")


@pytest.mark.slow
def test_label_bianchi_converges(reference_levels):
    for key in ("nfa15:on-shell:label", "nfa15:off-shell:label", "nfa17:on-shell:euler"):
        assert_converges(reference_levels, key)
    coarse, fine = reference_levels
    gap = abs(fine["nfa15:on-shell:label"].norms["Linf"] - fine["nfa17:on-shell:euler"].norms["Linf"])
    assert gap <= coarse["nfa15:on-shell:label"].norms["Linf"]


@pytest.mark.slow
def test_noether_currents_after_evolution(closures_levels):
    for key in ("eq4.35da", "eq4.22:label"):
        assert_converges(closures_levels, key)
    coarse, fine = (level["eq4.22:label"].extra for level in closures_levels)
    assert fine["flux_check"] < 1e-12
    for check in ("pushforward_check", "generic_path_check"):
        assert_order(check, coarse[check], fine[check])


@pytest.mark.slow
def test_determining_residuals_converge(closures_levels):
    tags = ("eq4.34", "eq4.35a", "eq4.35b", "eq4.35c", "eq4.35aa")
    keys = sorted(k for k in closures_levels[0] if k.split(":")[0] in tags)
    assert len(keys) == 10
    for key in keys:
        assert_converges(closures_levels, key)
    assert_converges(closures_levels, "eq4.32:label")


@pytest.mark.slow
def test_multiplier_q_after_evolution(closures_levels):
    assert_converges(closures_levels, "nfa29:Q:label")
    for key in sorted(k for k in closures_levels[0] if k.startswith("eq4.38c")):
        assert_converges(closures_levels, key)
