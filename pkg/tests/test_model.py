import math

import numpy as np
import pytest
from scipy.optimize import brentq

from entirefront.errors import AssumptionError, EnvelopeError, ParameterError
from entirefront.model import (build_envelopes_epidemic, build_envelopes_population, fd_jacobian,
                               make_buffered, make_epidemic, make_model, make_population)

from conftest import E1, POPULATION


def test_buffered_equilibrium_and_jacobian():
    m = make_buffered(1, 1, 1, 0.5, 1)
    np.testing.assert_allclose(m.K, [1.0, 1.0 / 3.0])
    np.testing.assert_allclose(m.jacobian0, [[0.5, 1.0], [0.5, -1.0]])
    np.testing.assert_array_equal(m.f([0.0, 0.0]), [0.0, 0.0])
    np.testing.assert_allclose(m.f(m.K), 0.0, atol=1e-14)
    np.testing.assert_allclose(fd_jacobian(m.reaction, np.zeros(2)), m.jacobian0, atol=1e-8)


@pytest.mark.parametrize("bad", ["d1", "k2", "b"])
def test_buffered_rejects_nonpositive(bad):
    p = dict(d1=1, d2=1, k1=1, k2=0.5, b=1)
    p[bad] = 0.0
    with pytest.raises(ParameterError):
        make_buffered(**p)


def test_epidemic_g1():
    m = make_model("epidemic", E1)
    assert m.info["k"] == pytest.approx(1.0)
    np.testing.assert_allclose(m.K, [1.0, 1.0])
    assert m.cooperative and m.envelopes is None
    np.testing.assert_array_equal(m.f([0.0, 0.0]), [0.0, 0.0])


def test_epidemic_g2_noncooperative():
    m = make_epidemic(1, 1, 1, 1, "g2", 3, 1)
    assert m.info["k"] == pytest.approx(math.sqrt(2.0))
    assert m.info["u_max"] == pytest.approx(1.0)
    assert not m.cooperative
    np.testing.assert_allclose(m.f(m.K), 0.0, atol=1e-12)


def test_epidemic_without_positive_equilibrium():
    with pytest.raises(AssumptionError):
        make_epidemic(1, 1, 1, 2, "g1", 2, 1)


def test_epidemic_envelopes():
    m = make_epidemic(1, 1, 1, 1, "g2", 3, 1)
    env = m.envelopes
    np.testing.assert_allclose(env.K_plus, [1.5, 1.5], rtol=1e-12)
    # 3u/(1+u²) = g(1.5) = 18/13  <=>  18u² - 39u + 18 = 0, smaller root 2/3
    assert m.info["u_min"] == pytest.approx(2.0 / 3.0, abs=1e-10)
    np.testing.assert_allclose(env.f_plus(env.K_plus), 0.0, atol=1e-12)
    np.testing.assert_allclose(env.f_minus(env.K_minus), 0.0, atol=1e-12)
    with pytest.raises(EnvelopeError):
        build_envelopes_epidemic(make_model("epidemic", E1))


def test_population_cooperative_case():
    m = make_population(1, 1, 2, 1, 1.8, 2)
    oracle = brentq(lambda k: 2 * k * math.exp(-k) - 2 * k + 0.2, 1e-6, 5.0, xtol=1e-14)
    assert m.K[0] == pytest.approx(oracle, abs=1e-10)
    assert m.cooperative
    np.testing.assert_allclose(m.f(m.K), 0.0, atol=1e-12)


def test_population_noncooperative_case():
    m = make_model("population", POPULATION)
    oracle = brentq(lambda k: 2 * k * math.exp(-k) - (k - 1), 1.0, 5.0, xtol=1e-14)
    assert m.K[0] == pytest.approx(oracle, abs=1e-10)
    assert m.K[0] == pytest.approx(1.63, abs=0.01)
    assert not m.cooperative
    np.testing.assert_allclose(m.f(m.K), 0.0, atol=1e-12)


def test_population_envelopes():
    m = make_model("population", POPULATION)
    extra = m.info
    k1p = 1.0 + 2.0 * math.exp(-1.0)
    assert extra["K1_plus"] == pytest.approx(k1p, abs=1e-11)
    target = k1p * math.exp(-k1p)
    h0 = brentq(lambda h: h * math.exp(-h) - target, 1e-9, 1.0, xtol=1e-14)
    assert extra["h0"] == pytest.approx(h0, abs=1e-10)
    env = m.envelopes
    np.testing.assert_allclose(env.f_plus(env.K_plus), 0.0, atol=1e-12)
    np.testing.assert_allclose(env.f_minus(env.K_minus), 0.0, atol=1e-12)
    assert np.all(env.K_minus <= m.K) and np.all(m.K <= env.K_plus)
    with pytest.raises(EnvelopeError):
        build_envelopes_population(make_population(1, 1, 2, 1, 1.8, 2))


@pytest.mark.parametrize("params, name", [
    (dict(POPULATION, alpha=2.5), "r1 > alpha"),
    (dict(POPULATION, d2=2.0), "d1 >= d2"),
    (dict(POPULATION, delta=0.1), "delta >= r1*r2/(r1+r2-alpha)"),
])
def test_population_condition_violations(params, name):
    with pytest.raises(AssumptionError, match=name.replace("*", r"\*").replace("(", r"\(")
                       .replace(")", r"\)").replace("+", r"\+")):
        make_model("population", params)


def test_reaction_vectorized_over_grids():
    m = make_model("epidemic", E1)
    u = np.random.default_rng(0).uniform(0, 1, (2, 7, 3))
    out = m.reaction(u)
    assert out.shape == u.shape
    np.testing.assert_allclose(out[:, 4, 1], m.f(u[:, 4, 1]))


def test_lipschitz_bound_covers_diagonal_derivatives():
    for m in (make_model("epidemic", E1), make_model("population", POPULATION),
              make_buffered(1, 1, 1, 0.5, 1)):
        rng = np.random.default_rng(1)
        pts = rng.uniform(0, 1, (m.m, 400)) * m.state_box_upper[:, None]
        reactions = [m.reaction] if m.envelopes is None else [
            m.reaction, m.envelopes.f_minus, m.envelopes.f_plus]
        for f in reactions:
            J = fd_jacobian(f, pts)
            diag = np.abs(np.einsum("iin->in", J))
            assert diag.max() <= m.lipschitz_L


def test_unknown_kind_and_bad_parameters():
    with pytest.raises(ParameterError):
        make_model("nope", {})
    with pytest.raises(ParameterError):
        make_model("epidemic", {"d1": 1.0})
    with pytest.raises(ParameterError):
        make_model("custom", {"registry": "missing"})
