import numpy as np
import pytest

from entirefront.checker import (FAIL, HEURISTIC, PASS, AssumptionReport, Verdict, check_all,
                                 check_cooperative, check_envelope_order, check_equilibria,
                                 check_H1_H2, check_subhomog)
from entirefront.model import EnvelopePair, fd_jacobian, make_custom, make_model
from entirefront.spectral import compute_cstar

from conftest import E1, POPULATION

BUFFERED = dict(d1=1.0, d2=1.0, k1=1.0, k2=0.5, b=1.0)
G2 = dict(E1, g_kind="g2", omega=3.0)


def _replay_cooperative(reaction, verdict):
    ce = verdict.counterexample
    i, j = [int(s) - 1 for s in ce["inequality"].replace("d f_", "").replace("/d u_", " ")
            .replace(" >= 0", "").split()]
    J = fd_jacobian(reaction, np.asarray(ce["point"]))
    return J[i, j]


def test_buffered_is_cooperative():
    m = make_model("buffered", BUFFERED)
    assert check_cooperative(m.reaction, m.K).status == PASS


def test_population_noncooperative_witness(population):
    v = check_cooperative(population.reaction, population.K)
    assert v.status == FAIL
    assert v.counterexample["point"][0] > 1.0
    assert _replay_cooperative(population.reaction, v) < 0
    assert _replay_cooperative(population.reaction, v) == pytest.approx(
        v.counterexample["margin"], rel=1e-6)


def test_epidemic_envelopes_cooperative():
    m = make_model("epidemic", G2)
    for f in (m.envelopes.f_minus, m.envelopes.f_plus):
        assert check_cooperative(f, m.envelopes.K_plus).status == PASS


@pytest.mark.parametrize("kind, params", [
    ("custom", {"registry": "fisher"}), ("buffered", BUFFERED)])
def test_subhomogeneity_cooperative(kind, params):
    m = make_model(kind, params)
    v = check_subhomog(m.reaction, compute_cstar(m), m.K)
    assert v.status == HEURISTIC
    assert v.samples_used == 4 * 10_000


def test_subhomogeneity_envelopes():
    for params in (G2,):
        m = make_model("epidemic", params)
        v = check_subhomog(m.envelopes.f_plus, compute_cstar(m), m.envelopes.K_plus)
        assert v.status == HEURISTIC


def test_subhomogeneity_violation_replays():
    # f(u) = u + 2u² - 3u³ exceeds f'(0)u = u for small u
    m = make_custom("super", [1.0], lambda u: u * (1.0 - u) * (1.0 + 3.0 * u), [1.0], [[1.0]])
    sp = compute_cstar(m)
    v = check_subhomog(m.reaction, sp, m.K)
    assert v.status == FAIL
    ce = v.counterexample
    lhs = m.f(np.asarray(ce["point"]))
    rhs = m.jacobian0 @ np.asarray(ce["z"])
    assert np.max(lhs - rhs) > 0


def test_envelope_order():
    m = make_model("epidemic", G2)
    assert check_envelope_order(m).status == PASS
    pop = make_model("population", POPULATION)
    assert check_envelope_order(pop).status == PASS
    env = m.envelopes
    swapped = EnvelopePair(env.f_plus, env.f_minus, env.K_minus, env.K_plus)
    v = check_envelope_order(m, swapped)
    assert v.status == FAIL
    ce = v.counterexample
    pt = np.asarray(ce["point"])
    replay = {"f- <= f": lambda: np.min(m.f(pt) - swapped.f_minus(pt)),
              "f <= f+": lambda: np.min(swapped.f_plus(pt) - m.f(pt)),
              "f+(K+) = 0": lambda: -np.max(np.abs(swapped.f_plus(pt))),
              "f-(K-) = 0": lambda: -np.max(np.abs(swapped.f_minus(pt)))}
    key = next(k for k in replay if ce["inequality"].startswith(k))
    assert replay[key]() < 0
    assert replay[key]() == pytest.approx(ce["margin"])


def test_H1_H2_examples():
    r1 = check_H1_H2(make_model("epidemic", E1))
    assert r1.status("H1") == PASS and r1.status("H2") in (PASS, HEURISTIC)
    assert r1.entries["H2"].detail["variant"] == "a"
    r2 = check_H1_H2(make_model("epidemic", G2))
    assert r2.status("H1") == PASS
    assert r2.entries["H2"].detail == {"variant": "b", "u_max": 1.0}
    low = check_H1_H2(make_model("epidemic", dict(G2, omega=1.5)))
    assert low.entries["k<=u_max"].detail["cooperative_regime"]
    assert not r2.entries["k<=u_max"].detail["cooperative_regime"]


def test_extra_equilibrium_reported():
    f = lambda u: u * (1.0 - u) * (u - 0.3) * (u - 0.6) / 0.18
    m = make_custom("multi", [1.0], f, [1.0], [[1.0]])
    v = check_equilibria(m.reaction, m.K)
    assert v.status == FAIL and not v.enforced
    assert np.abs(m.f(np.asarray(v.counterexample["point"]))).max() <= 1e-10
    assert min(abs(v.counterexample["point"][0] - r) for r in (0.3, 0.6)) < 1e-8


@pytest.mark.parametrize("kind, params", [
    ("buffered", BUFFERED), ("epidemic", G2), ("population", POPULATION)])
def test_reports_deterministic_and_replayable(kind, params):
    m = make_model(kind, params)
    a = check_all(m, seed=7, samples=2000)
    b = check_all(m, seed=7, samples=2000)
    assert a.to_dict() == b.to_dict()
    for name, v in a.entries.items():
        if v.status == FAIL:
            assert v.counterexample["point"] is not None
            if name.startswith("A2") or name.startswith("A4"):
                assert _replay_cooperative(m.reaction, v) < 0


def test_all_builtin_reports_pass():
    for kind, params in (("buffered", BUFFERED), ("epidemic", E1), ("epidemic", G2),
                         ("population", POPULATION),
                         ("population", dict(POPULATION, alpha=1.8, delta=2.0))):
        rep = check_all(make_model(kind, params), samples=2000)
        assert rep.ok, rep.table()


def test_verdict_contract():
    with pytest.raises(ValueError):
        Verdict(FAIL, 3)
    rep = AssumptionReport().add("x", Verdict(FAIL, 1, {"point": [0], "inequality": "i",
                                                          "margin": -1.0}, enforced=False))
    assert rep.ok and rep.hard_failures == []
    rep.add("y", Verdict(FAIL, 1, {"point": [0], "inequality": "j", "margin": -1.0}))
    assert not rep.ok and rep.hard_failures == ["y"]
    assert "reported only" in rep.table()
    assert rep.samples_used == 2
