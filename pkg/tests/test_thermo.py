import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from app.thermo import EosDomainError, PolytropicEos, eos_eval

densities = st.floats(1e-3, 1e3, allow_nan=False)
entropies = st.floats(-5, 5, allow_nan=False)


@given(rho=densities, S=entropies)
def test_first_law_consistency(rho, S):
    eos = PolytropicEos(gamma=1.4, cv=0.7, S_ref=0.3)
    state = eos_eval(eos, np.array(rho), np.array(S))
    # p = ρ ∂ε/∂ρ - ε，T = (∂ε/∂S)/ρ，h = (ε + p)/ρ
    assert state["p"] == pytest.approx(rho * eos.eps_rho(rho, S) - state["eps"], rel=1e-10)
    assert state["T"] == pytest.approx(eos.eps_S(rho, S) / rho, rel=1e-10)
    assert state["h"] == pytest.approx((state["eps"] + state["p"]) / rho, rel=1e-10)


@given(rho=densities, S=entropies)
def test_eps_rho_matches_finite_difference(rho, S):
    eos = PolytropicEos()
    step = 1e-6 * rho
    numeric = (eos.internal_energy(rho + step, S) - eos.internal_energy(rho - step, S)) / (2 * step)
    assert eos.eps_rho(rho, S) == pytest.approx(numeric, rel=1e-6)


@given(rho=densities, p=st.floats(1e-3, 1e3, allow_nan=False))
def test_entropy_for_inverts_pressure(rho, p):
    eos = PolytropicEos(gamma=5.0 / 3.0)
    S = eos.entropy_for(np.array(rho), np.array(p))
    assert eos.pressure(np.array(rho), S) == pytest.approx(p, rel=1e-10)


def test_reference_values():
    eos = PolytropicEos(gamma=5.0 / 3.0)
    state = eos.evaluate(np.array(1.0), np.array(0.0))
    assert state.eps == pytest.approx(1.5)
    assert state.p == pytest.approx(1.0)
    assert eos.sound_speed_squared(np.array(1.0), np.array(0.0)) == pytest.approx(5.0 / 3.0)


@pytest.mark.parametrize("rho", [0.0, -1.0, np.nan])
def test_non_positive_density(rho):
    with pytest.raises(EosDomainError):
        PolytropicEos().evaluate(np.array([1.0, rho]), np.zeros(2))


@pytest.mark.parametrize("kwargs", [{"gamma": 1.0}, {"cv": 0.0}, {"mu0": -1.0}])
def test_invalid_parameters(kwargs):
    with pytest.raises(ValueError):
        PolytropicEos(**kwargs)
