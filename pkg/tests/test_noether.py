import numpy as np
import pytest

from app.lagrange import InsufficientHistoryError
from app.noether import (
    PV_VARIANTS,
    ConservationReport,
    InvariantConfigError,
    InvariantDrift,
    UnknownLabelError,
    advected_invariants,
    canonical_system,
    cheviakov_residual,
    ertel_invariant,
    field_norms,
    force_F,
    magnetic_system,
    pv_density,
    pv_residual,
    term_scale,
    tracer_subset,
    vorticity_residuals,
)
from app.numerics import Grid
from app.thermo import PolytropicEos

from .conftest import make_frame, orszag_tang_state
from .test_solver import uniform_state


def pv_error(n, variant="mhd"):
    grid = Grid(n, n, 1)
    eos = PolytropicEos()
    return pv_residual(make_frame(orszag_tang_state(grid, eos), eos), "psi", variant)


def test_field_norms_of_vector():
    grid = Grid(16, 16, 1)
    residual = grid.zeros(3)
    residual[0, 1, 2, 0] = 3.0
    residual[1, 1, 2, 0] = 4.0
    norms = field_norms(residual, grid.cell_volume)
    assert norms["Linf"] == pytest.approx(5.0)
    assert norms["L2"] == pytest.approx(5.0 * np.sqrt(grid.cell_volume))


def test_report_key_and_relative():
    grid = Grid(16, 16, 1)
    report = ConservationReport(
        name="eq2.7", variant="rho", side="label", residual=np.full(grid.shape, 2.0),
        grid=grid, t=0.0, scale=4.0,
    )
    assert report.key == "eq2.7:rho:label"
    assert report.relative == pytest.approx(0.5)
    payload = report.to_dict()
    assert payload["name"] == "eq2.7"
    assert payload["side"] == "label"


def test_term_scale_ignores_missing():
    assert term_scale(None, np.array([-3.0, 1.0])) == 3.0
    assert term_scale() == 0.0


def test_force_components(ot_state, eos, ops):
    force = force_F(ot_state, eos, ops)
    np.testing.assert_allclose(force.total - force.nonpotential, force.gradient)
    flipped = force_F(ot_state, eos, ops, lorentz_sign=-1.0)
    np.testing.assert_allclose(flipped.lorentz, -force.lorentz)


def test_pv_density(ot_state, ops):
    density = pv_density(ot_state, "psi", ops)
    assert density.name == "pv:psi"
    with pytest.raises(UnknownLabelError):
        pv_density(ot_state, "nope", ops)


@pytest.mark.parametrize("variant", sorted(PV_VARIANTS))
def test_pv_uniform_state_is_exact(grid, eos, variant):
    report = pv_residual(make_frame(uniform_state(grid), eos), "psi", variant)
    assert report.norms["Linf"] < 1e-13
    assert report.name == PV_VARIANTS[variant]


@pytest.mark.parametrize("variant", ["mhd", "fullF"])
def test_pv_law_converges(variant):
    coarse, fine = pv_error(32, variant), pv_error(64, variant)
    assert fine.norms["Linf"] < coarse.norms["Linf"] / 8


def test_mhd_and_fullF_agree_in_2p5d(ot_state, eos):
    frame = make_frame(ot_state, eos)
    mhd = pv_residual(frame, "psi", "mhd")
    full = pv_residual(frame, "psi", "fullF")
    assert np.max(np.abs(mhd.residual - full.residual)) <= 1e-12 * mhd.scale


def test_curl_term_does_not_change_residual(ot_state, eos):
    plain = pv_residual(make_frame(ot_state, eos), "psi", "mhd")
    curled = pv_residual(make_frame(ot_state, eos, curl_term=True), "psi", "mhd")
    assert np.max(np.abs(plain.residual - curled.residual)) <= 1e-11 * plain.scale
    assert curled.extra["curl_term"] is True


def test_flipped_lorentz_sign_is_detected(eos):
    state = orszag_tang_state(Grid(32, 32, 1), eos)
    honest = pv_residual(make_frame(state, eos), "psi", "mhd")
    flipped = pv_residual(make_frame(state, eos, lorentz_sign=-1.0), "psi", "mhd")
    assert flipped.relative > 10 * honest.relative


def test_hydro_premise_flagged(ot_state, eos):
    report = pv_residual(make_frame(ot_state, eos), "psi", "hydro")
    assert report.premise_norms["B_linf"] > 0
    assert report.premise_norms["advection_linf"] < 1e-13


def test_unknown_pv_variant(ot_state, eos):
    with pytest.raises(ValueError):
        pv_residual(make_frame(ot_state, eos), "psi", "other")


def test_snapshot_mode_needs_neighbours(ot_state, eos):
    frame = make_frame(ot_state, eos, mode="snapshot")
    with pytest.raises(InsufficientHistoryError):
        pv_residual(frame, "psi", "mhd")


def test_unknown_mode(ot_state, eos):
    with pytest.raises(ValueError):
        make_frame(ot_state, eos, mode="explicit")


def test_canonical_cheviakov_matches_pv(ot_state, eos):
    frame = make_frame(ot_state, eos)
    canonical = cheviakov_residual(frame, canonical_system("psi"))
    pv = pv_residual(frame, "psi", "mhd")
    assert canonical.name == "eq1.5"
    assert canonical.variant == "canonical"
    np.testing.assert_allclose(canonical.density, pv.density, atol=1e-14)
    assert np.max(np.abs(canonical.flux - pv.flux)) <= 1e-12 * np.max(np.abs(pv.flux))


def test_magnetic_cheviakov_premises(ot_state, eos):
    report = cheviakov_residual(make_frame(ot_state, eos), magnetic_system("psi"))
    assert report.premise_norms["divN_linf"] < 1e-12
    assert report.premise_norms["evolution_linf"] < 1e-12


def test_magnetic_cheviakov_without_label(ot_state, eos):
    report = cheviakov_residual(make_frame(ot_state, eos), magnetic_system())
    assert report.norms["Linf"] == 0.0


def test_vorticity_residuals(eos):
    state = orszag_tang_state(Grid(32, 32, 1), eos)
    reports = vorticity_residuals(make_frame(state, eos), "psi")
    assert {r.name for r in reports.values()} == {"nfa34", "nfa35", "nfa36"}
    # ∇ψ 的拖曳与标签倾向量共用同一算子
    assert reports["grad_advect"].relative < 1e-12
    for report in reports.values():
        assert report.relative < 1e-1


def test_vorticity_residuals_uniform(grid, eos):
    for report in vorticity_residuals(make_frame(uniform_state(grid), eos), "psi").values():
        assert report.norms["Linf"] < 1e-13


def test_advected_invariants_need_vector_potential(ot_state, ops):
    assert set(advected_invariants(ot_state, ops, ["psi1"])) == {"psi1"}
    with pytest.raises(InvariantConfigError):
        advected_invariants(ot_state, ops, ["psi2"])
    with pytest.raises(InvariantConfigError):
        advected_invariants(ot_state, ops, ["psi9"])


def test_advected_invariants_with_potential(ot_state, ops):
    ot_state.A = ot_state.grid.zeros(3)
    values = advected_invariants(ot_state, ops)
    assert set(values) == {"psi1", "psi2", "psi3"}
    np.testing.assert_array_equal(values["psi2"].values, 0.0)


def test_ertel_invariant_vanishes_for_uniform_entropy(grid, ops):
    state = uniform_state(grid)
    assert ertel_invariant(state, ops).linf() == 0.0


def test_tracer_subset(grid):
    indices = tracer_subset(grid, 10)
    assert len(indices) == 10
    assert indices[0] == 0 and indices[-1] == grid.nx * grid.ny - 1
    assert len(tracer_subset(grid, 10**6)) == grid.nx * grid.ny


def test_drift_requires_map(ot_state, eos):
    drift = InvariantDrift(["psi1"], ot_state.grid, 20)
    with pytest.raises(InvariantConfigError):
        drift.record_initial(make_frame(ot_state, eos))
    with pytest.raises(InvariantConfigError):
        InvariantDrift(["energy"], ot_state.grid)


def test_drift_is_zero_at_start(ot_state, eos):
    frame = make_frame(ot_state, eos, with_map=True)
    drift = InvariantDrift(["psi1", "ertel"], ot_state.grid, 20)
    drift.record_initial(frame)
    reports = drift.reports(frame)
    assert [r.key for r in reports] == ["nfa31:psi1", "eq1.1:ertel"]
    assert all(r.norms["Linf"] == 0.0 for r in reports)
