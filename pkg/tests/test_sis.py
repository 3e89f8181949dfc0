import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from entirefront.errors import DomainError
from entirefront.sis import compute_gamma, sub_super_pair, verify_gamma
from entirefront.spectral import compute_cstar


@pytest.fixture(scope="module")
def logistic_gamma(fisher, fisher_spectral):
    return compute_gamma(fisher, fisher_spectral)


@pytest.fixture(scope="module")
def e1_gamma(e1, e1_spectral):
    return compute_gamma(e1, e1_spectral)


def test_sub_super_pair_examples(fisher_spectral):
    up, lo = sub_super_pair(fisher_spectral, [1.0], 1.5, 2.0, t=[0.0, -2.0, -60.0])
    assert up[0, 0] == pytest.approx(1.0) and lo[0, 0] == 0.0
    assert up[1, 0] == pytest.approx(math.exp(-2.0))
    assert lo[1, 0] == pytest.approx(math.exp(-2.0) - 2.0 * math.exp(-3.0))
    assert up[2, 0] < 1e-25 and lo[2, 0] < 1e-25
    assert np.all(lo <= up)


@pytest.mark.parametrize("eps", [1.0, 2.0, 0.5])
def test_sub_super_pair_rejects_epsilon(fisher_spectral, eps):
    with pytest.raises(DomainError):
        sub_super_pair(fisher_spectral, [1.0], eps, 2.0)


def test_logistic_closed_form(fisher, logistic_gamma):
    s = logistic_gamma.grid
    exact = 1.0 / (1.0 + np.exp(-s))
    assert np.max(np.abs(logistic_gamma.values[:, 0] - exact)) <= 1e-6
    rep = verify_gamma(fisher, logistic_gamma)
    assert rep["ok"], rep


def test_perturbed_node_fails_residual(fisher, logistic_gamma):
    values = logistic_gamma.values.copy()
    j = int(np.argmin(np.abs(logistic_gamma.grid)))
    values[j] += 1e-2
    rep = verify_gamma(fisher, logistic_gamma.with_values(values))
    assert not rep["residual"]["ok"]
    assert abs(rep["residual"]["at_t"] - logistic_gamma.grid[j]) <= 1.5 * logistic_gamma.dt


def test_e1_against_ode_oracle(e1, e1_spectral, e1_gamma):
    lam, vs = e1_spectral.growth_rate, e1_spectral.v_star
    t0 = -40.0
    # Γ(t0) = v* e^{λ t0} up to O(e^{2λ t0})
    sol = solve_ivp(lambda t, u: e1.f(u), (t0, 40.0), vs * math.exp(lam * t0),
                    method="DOP853", rtol=1e-12, atol=1e-16, dense_output=True)
    s = e1_gamma.grid[e1_gamma.grid <= 40.0]
    ref = sol.sol(s).T
    assert np.max(np.abs(ref - e1_gamma(s))) <= 1e-6
    # the normalized orbit is still ~1e-5 below K at t = 40 (oracle and profile agree);
    # the grid is extended until the gap closes
    assert np.max(np.abs(e1_gamma(40.0) - ref[-1])) <= 1e-6
    assert e1_gamma.t1 > 40.0
    assert np.max(np.abs(e1_gamma.values[-1] - e1.K)) <= 1e-6


def test_e1_invariants(e1, e1_spectral, e1_gamma):
    rep = verify_gamma(e1, e1_gamma)
    assert rep["ok"], rep
    s, u = e1_gamma.grid, e1_gamma.values
    lam, vs = e1_spectral.growth_rate, e1_spectral.v_star
    upper, lower = sub_super_pair(e1_spectral, e1.K, e1_gamma.meta["epsilon"],
                                  e1_gamma.meta["q"], s)
    assert np.all(lower <= u + 1e-12) and np.all(u <= upper + 1e-12)
    mask = s <= -10.0
    ratio = u[mask] * np.exp(-lam * s[mask])[:, None]
    np.testing.assert_allclose(ratio.max(axis=0), vs, rtol=0.02)


def test_lower_envelope_gamma_limits(population):
    sp = compute_cstar(population)
    lower = population.lower()
    g = compute_gamma(lower, sp)
    assert np.all(g.values[0] <= 1e-12)
    np.testing.assert_allclose(g.values[-1], population.envelopes.K_minus, atol=1e-10)
    assert verify_gamma(lower, g)["ok"]


def test_noncooperative_model_refused(population):
    with pytest.raises(DomainError):
        compute_gamma(population, compute_cstar(population))
