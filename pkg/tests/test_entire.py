import math
from dataclasses import replace

import numpy as np
import pytest

from entirefront.errors import (ConfigError, ConstructionError, HypothesisError, SpeedError)
from entirefront.entire import (EntireConfig, Wave, build_profiles, construct,
                                diff_bound, initial_data, lower_envelope, monotone_in_h,
                                pi_bound, upper_bound, vartheta, verify_qualitative,
                                window_bounds)
from entirefront.model import make_model
from entirefront.spectral import compute_cstar

# small Fisher runs: c* = 2, L = 1.25
SMALL = dict(n_schedule=(1.0, 2.0), t_end=3.0, dx=0.05, dt=0.002, half_width=30.0)


@pytest.fixture(scope="module")
def fisher_cfg():
    return EntireConfig(waves=(Wave(2.5),), chi=(1, 1), **SMALL)


@pytest.fixture(scope="module")
def fisher_profiles(fisher, fisher_spectral, fisher_cfg):
    return build_profiles(fisher, fisher_spectral, fisher_cfg)


@pytest.fixture(scope="module")
def fisher_run(fisher, fisher_spectral, fisher_cfg, fisher_profiles, run_cache):
    return construct(fisher_cfg, fisher, fisher_profiles, fisher_spectral, cache=run_cache)


def test_initial_data_sis_only(fisher_profiles):
    cfg = EntireConfig(waves=(Wave(2.5),), chi=(0, 1), h_last=0.5)
    x = np.linspace(-20, 20, 41)
    phi = initial_data(cfg, fisher_profiles, 3.0, x)
    np.testing.assert_array_equal(phi, np.broadcast_to(fisher_profiles.gamma(-2.5), phi.shape))


def test_initial_data_far_left(fisher_cfg, fisher_profiles):
    x = np.array([-80.0])
    n = 2.0
    front = fisher_profiles.fronts[2.5](x - 2.5 * n)
    assert front[0, 0] < 1e-12
    phi = initial_data(fisher_cfg, fisher_profiles, n, x)
    np.testing.assert_array_equal(phi[0], fisher_profiles.gamma(-n))


def test_initial_data_is_envelope_at_start(fisher_cfg, fisher_profiles):
    x = np.linspace(-30, 30, 61)
    np.testing.assert_array_equal(initial_data(fisher_cfg, fisher_profiles, 2.0, x),
                                  lower_envelope(fisher_cfg, fisher_profiles, x, -2.0))


def test_inactive_configuration(fisher_profiles):
    cfg = EntireConfig(waves=(Wave(2.5),), chi=(0, 0))
    with pytest.raises(ConfigError):
        cfg.validate()
    with pytest.raises(ConfigError):
        initial_data(cfg, fisher_profiles, 1.0, np.zeros(3))


def test_pi_bound_examples(e1_spectral):
    sp = e1_spectral
    last = EntireConfig(waves=(Wave(1.5),), chi=(0, 1), h_last=2.0)
    np.testing.assert_allclose(pi_bound(last, sp, [3.0], -2.0)[0], sp.v_star)
    one = EntireConfig(waves=(Wave(1.5, 1.0),), chi=(1, 0))
    # x + 1.5 t + 1 = 0 at x = 0.5, t = -1
    np.testing.assert_allclose(pi_bound(one, sp, [0.5], -1.0)[0], sp.v(sp.lambda1(1.5)))
    both = EntireConfig(waves=(Wave(1.5),), chi=(1, 1))
    lam1 = (1.5 - math.sqrt(2.25 - 4.0 * (math.sqrt(2.0) - 1.0))) / 2.0
    expected = (sp.v(lam1) * math.exp(-7.5 * lam1)
                + sp.v_star * math.exp(-5.0 * sp.growth_rate))
    np.testing.assert_allclose(pi_bound(both, sp, [0.0], -5.0)[0], expected, rtol=1e-12)


def test_vartheta(e1_spectral):
    cfg = EntireConfig(waves=(Wave(1.5), Wave(2.0, nu=-1)), chi=(1, 1, 0))
    m0 = math.sqrt(2.0) - 1.0
    # c λ₁(c) = λ₁² + M(0) on the quadratic branch, smallest for the faster wave
    lam = lambda c: (c - math.sqrt(c * c - 4.0 * m0)) / 2.0
    assert vartheta(cfg, e1_spectral) == pytest.approx(min(c * lam(c) for c in (1.5, 2.0)),
                                                       rel=1e-9)


def test_validation(e1, e1_spectral, population):
    slow = EntireConfig(waves=(Wave(1.3),), chi=(1, 1), speed_factor=1.05)
    with pytest.raises(SpeedError):
        slow.validate(e1_spectral, e1)
    with pytest.raises(ConfigError):
        EntireConfig(waves=(Wave(1.5),), chi=(1, 1), mode="noncooperative").validate(None, e1)
    with pytest.raises(ConfigError):
        EntireConfig(waves=(Wave(2.5),), chi=(1, 1)).validate(None, population)
    with pytest.raises(ConfigError):
        EntireConfig(waves=(Wave(1.5, nu=2),), chi=(1, 1)).validate()
    with pytest.raises(ConfigError):
        EntireConfig(waves=(Wave(1.5),), chi=(1, 1), n_schedule=(4, 2)).validate()
    with pytest.raises(ConfigError):
        EntireConfig(waves=(Wave(1.5),), chi=(1,)).validate()


def test_fisher_construction(fisher, fisher_cfg, fisher_profiles, fisher_run):
    traj, rep = fisher_run
    assert rep.ok, rep.to_dict()
    assert rep.monotone_in_n_min >= -1e-8
    assert rep.monotone_in_t_min > 0
    wl, wr = window_bounds(fisher_cfg, fisher)
    assert rep.window == (wl, wr)
    # recompute the final run's lower margin from the profiles
    mask = (traj.x >= wl) & (traj.x <= wr)
    low = min(float(np.min((traj.at(t) - lower_envelope(fisher_cfg, fisher_profiles, traj.x,
                                                        t))[mask])) for t in traj.times)
    assert low == rep.per_run[-1]["lower_margin"]["value"]
    assert rep.lower_margin["value"] <= low
    assert traj.times[0] == -2.0 and traj.times[-1] == 3.0
    assert np.allclose(np.diff(traj.times), 0.5)


def test_construction_cache(fisher, fisher_spectral, fisher_cfg, fisher_profiles, fisher_run,
                            run_cache):
    traj, _ = fisher_run
    hits = run_cache.hits
    again, _ = construct(fisher_cfg, fisher, fisher_profiles, fisher_spectral, cache=run_cache)
    assert run_cache.hits == hits + len(fisher_cfg.n_schedule)
    np.testing.assert_array_equal(again.values, traj.values)


def test_refinement_shrinks_sandwich_defect(fisher, fisher_spectral, fisher_profiles):
    worst = []
    for dx, dt in ((0.1, 0.01), (0.05, 0.002)):
        cfg = EntireConfig(waves=(Wave(2.5),), chi=(1, 1), **dict(SMALL, dx=dx, dt=dt))
        _, rep = construct(cfg, fisher, fisher_profiles, fisher_spectral, barrier="analytic",
                           raise_on_failure=False)
        worst.append(max(0.0, -rep.lower_margin["value"], -rep.upper_margin["value"]))
    assert worst[1] <= worst[0]
    assert worst[1] < 1e-3


def test_sandwich_failure_raises(fisher, fisher_spectral, fisher_profiles):
    cfg = EntireConfig(waves=(Wave(2.5),), chi=(1, 1), tol=0.0, **SMALL)
    _, rep = construct(cfg, fisher, fisher_profiles, fisher_spectral, raise_on_failure=False)
    assert rep.lower_margin["value"] < 0
    with pytest.raises(ConstructionError) as info:
        construct(cfg, fisher, fisher_profiles, fisher_spectral)
    assert info.value.details["worst"] == rep.lower_margin


def test_qualitative_report(fisher, fisher_spectral, fisher_cfg, fisher_run):
    traj, _ = fisher_run
    q = verify_qualitative(traj, fisher_cfg, fisher_spectral, fisher)
    for key in ("positivity", "below_K", "time_monotone", "small_at_minus_infinity"):
        assert q[key]["ok"], (key, q[key])
    assert q["early_exponent"]["expected_kind"] == "growth_rate"
    # n = 2 leaves a single snapshot in the fit window
    assert q["early_exponent"]["points"] == 1 and not q["early_exponent"]["ok"]


def test_e1_approaches_K(e1, e1_spectral, e1_config, e1_run):
    traj, _, profiles, _ = e1_run
    q = verify_qualitative(traj, e1_config, e1_spectral, e1)
    assert q["time_monotone"]["ok"] and q["positivity"]["ok"] and q["below_K"]["ok"]
    # the window's left end follows the SIS term, so its distance to K bounds the gap
    sis_gap = float(np.max(e1.K - profiles.gamma(traj.times[-1])))
    gap = q["approach_K"]["sup_gap_at_t_end"]
    assert gap <= sis_gap + 1e-6
    assert gap == pytest.approx(sis_gap, rel=1e-2)
    mask = (traj.x >= traj.meta["window"][0]) & (traj.x <= traj.meta["window"][1])
    gaps = np.max(np.abs(traj.values[:, mask] - e1.K), axis=(1, 2))
    assert np.all(np.diff(gaps[-10:]) < 0)


def test_e1_approach_tolerance_at_t_end(e1, e1_spectral, e1_config, e1_run):
    traj, _, _, _ = e1_run
    q = verify_qualitative(traj, e1_config, e1_spectral, e1)
    assert q["approach_K"]["sup_gap_at_t_end"] <= 1e-2, q["approach_K"]


@pytest.mark.parametrize("which", [0, "last"])
def test_monotone_in_h(fisher, fisher_spectral, fisher_cfg, fisher_profiles, run_cache, which):
    r = monotone_in_h(fisher_cfg, fisher, fisher_profiles, fisher_spectral, 0.5, which,
                      cache=run_cache)
    assert r["ok"], r
    assert not r["identical"]
    same = monotone_in_h(fisher_cfg, fisher, fisher_profiles, fisher_spectral, 0.0, which,
                         cache=run_cache)
    assert same["identical"] and same["min_difference"] == 0.0


def test_diff_bound_fisher(fisher, fisher_spectral, fisher_cfg, fisher_profiles, fisher_run,
                           run_cache):
    traj, _ = fisher_run
    p1 = replace(fisher_cfg, chi=(0, 1))
    r1, _ = construct(p1, fisher, fisher_profiles, fisher_spectral, cache=run_cache)
    rep = diff_bound(fisher_cfg, p1, (traj, r1), fisher_spectral, fisher)
    assert rep["ok"], rep
    assert rep["min_difference"] >= 0.0
    same = diff_bound(fisher_cfg, fisher_cfg, (traj, traj), fisher_spectral, fisher)
    assert same["ok"] and same["max_abs_difference"] == 0.0


def test_diff_bound_rejects_bad_pairs(fisher, fisher_spectral, fisher_cfg, fisher_run):
    traj, _ = fisher_run
    with pytest.raises(ConfigError):
        diff_bound(fisher_cfg, replace(fisher_cfg, chi=(1, 0)), (traj, traj), fisher_spectral,
                   fisher)
    with pytest.raises(ConfigError):
        diff_bound(fisher_cfg, replace(fisher_cfg, chi=(0, 1), t_end=2.0), (traj, traj),
                   fisher_spectral, fisher)


def test_diff_bound_hypothesis():
    buffered = make_model("buffered", dict(d1=1.0, d2=1.0, k1=1.0, k2=0.5, b=1.0))
    sp = compute_cstar(buffered)
    cfg = EntireConfig(waves=(Wave(2.0),), chi=(1, 1), **SMALL)
    with pytest.raises(HypothesisError):
        diff_bound(cfg, replace(cfg, chi=(0, 1)), (None, None), sp, buffered)


def test_upper_bound_caps_at_K(fisher, fisher_spectral, fisher_cfg):
    x = np.linspace(-30, 30, 61)
    ub = upper_bound(fisher_cfg, fisher_spectral, fisher, x, 2.0)
    assert np.all(ub <= fisher.K) and ub[-1, 0] == fisher.K[0]
