"""Entire solutions built from fronts and the spatially independent solution.

For a parameter tuple p = ((c_i, h_i, ν_i), χ, h_{l+1}) the construction launches
initial-value problems at t = -n from

    φⁿ(x) = max{ max_i χ_i Φ_{c_i}(xν_i - c_i n + h_i), χ_{l+1} Γ(-n + h_{l+1}) }

and follows the nondecreasing family Uⁿ. Each Uⁿ is checked against the lower
envelope u̲(x,t) (the same maximum at time t) and the upper bound min{K, Π(x,t)}.

Discrete realization of the barrier
-----------------------------------
The lower envelope u̲ is a subsolution of the PDE but not of the discrete scheme, so
the analytic φⁿ breaks the ordering Uⁿ⁺¹(-n) ≥ φⁿ at the level of the truncation
error. To keep the ordering exact in the discrete scheme, the barrier pieces are
evolved by the scheme itself. Each active front translate runs from t = -n_max
(where it equals the analytic translate) with clamped analytic boundary data, and
the SIS piece is the spatially uniform scheme orbit started from Γ(-n_max + h_{l+1}).
The initial data for Uⁿ are the maximum of these pieces at t = -n. For n = n_max
this is exactly the analytic φⁿ; for smaller n it differs from it by the scheme's
truncation error. The sandwich bounds are always checked against the analytic u̲
and Π.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, ConstructionError, HypothesisError, SchemeError, SpeedError
from .front import compute_front
from .io import ArrayCache, cache_key, digest_arrays
from .checker import jacobian_bound_violation
from .model import ModelSpec
from .pde import Field, Grid, Stepper, Trajectory, n_steps, solve_ivp
from .profile import Profile
from .sis import SATURATION, compute_gamma
from .spectral import SpectralData

COOPERATIVE = "cooperative"
NONCOOPERATIVE = "noncooperative"
APPROACH_TOL = 1e-2


@dataclass(frozen=True)
class Wave:
    c: float
    h: float = 0.0
    nu: int = 1


@dataclass(frozen=True)
class EntireConfig:
    waves: tuple = ()
    chi: tuple = ()
    h_last: float = 0.0
    mode: str = COOPERATIVE
    n_schedule: tuple = (2.0, 4.0, 6.0, 8.0)
    t_end: float = 15.0
    dx: float = 0.05
    dt: float = 1e-3
    snapshot_step: float = 0.5
    tol_order: float = 1e-8
    tol: float = 1e-3
    window: Optional[tuple] = None
    half_width: Optional[float] = None
    speed_factor: float = 1.0

    def __post_init__(self):
        waves = tuple(w if isinstance(w, Wave) else Wave(**w) for w in self.waves)
        object.__setattr__(self, "waves", waves)
        object.__setattr__(self, "chi", tuple(int(c) for c in self.chi))
        object.__setattr__(self, "n_schedule", tuple(float(n) for n in self.n_schedule))
        if self.window is not None:
            object.__setattr__(self, "window", tuple(float(w) for w in self.window))

    @property
    def l(self):
        return len(self.waves)

    @property
    def active(self):
        return [i for i in range(self.l) if self.chi[i]]

    @property
    def sis_active(self):
        return bool(self.chi[self.l])

    @property
    def n_max(self):
        return max(self.n_schedule)

    def validate(self, spectral: SpectralData | None = None, model: ModelSpec | None = None):
        if len(self.chi) != self.l + 1 or any(c not in (0, 1) for c in self.chi):
            raise ConfigError("chi needs one 0/1 flag per wave plus one for the SIS term")
        if any(w.nu not in (1, -1) for w in self.waves):
            raise ConfigError("wave directions must be +1 or -1")
        if self.mode not in (COOPERATIVE, NONCOOPERATIVE):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if sum(self.chi) < 1:
            raise ConfigError("no active term: all chi flags are 0")
        sched = list(self.n_schedule)
        if sched != sorted(set(sched)) or sched[0] <= 0:
            raise ConfigError("n_schedule must be strictly increasing and positive")
        for t in sched + [self.t_end]:
            n_steps(0.0, t, self.dt)
            n_steps(0.0, t, self.snapshot_step)
        n_steps(0.0, self.snapshot_step, self.dt)
        if spectral is not None:
            for w in self.waves:
                if not w.c > spectral.c_star or w.c < self.speed_factor * spectral.c_star:
                    raise SpeedError(f"wave speed {w.c} must exceed "
                                     f"{self.speed_factor:g}·c* = "
                                     f"{self.speed_factor * spectral.c_star:.6g}")
        if model is not None:
            if self.mode == COOPERATIVE and not model.cooperative:
                raise ConfigError("cooperative mode requested for a non-cooperative model")
            if self.mode == NONCOOPERATIVE and model.envelopes is None:
                raise ConfigError("non-cooperative mode needs a model with envelopes")


@dataclass(frozen=True, eq=False)
class Profiles:
    """Fronts keyed by speed and the SIS profile, for the system the barrier lives in."""

    fronts: dict
    gamma: Optional[Profile]

    def digest(self):
        parts = [self.gamma.values if self.gamma is not None else np.zeros(0)]
        parts += [self.fronts[c].values for c in sorted(self.fronts)]
        return digest_arrays(*parts)


def barrier_model(model: ModelSpec, config: EntireConfig) -> ModelSpec:
    return model.lower() if config.mode == NONCOOPERATIVE else model


def build_profiles(model, spectral, config, tol_front=1e-8, tol_gamma=1e-12) -> Profiles:
    bm = barrier_model(model, config)
    speeds = sorted({config.waves[i].c for i in config.active})
    fronts = {c: compute_front(bm, spectral, c, tol_front) for c in speeds}
    gamma = compute_gamma(bm, spectral, tol_gamma) if config.sis_active else None
    return Profiles(fronts, gamma)


# ---------------------------------------------------------------------------
# analytic envelopes


def front_term(config, profiles, i, x, t):
    w = config.waves[i]
    return profiles.fronts[w.c](np.asarray(x) * w.nu + w.c * t + w.h)


def lower_envelope(config: EntireConfig, profiles: Profiles, x, t):
    """u̲(x, t): componentwise max of the active front translates and Γ(t + h_{l+1})."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    terms = [front_term(config, profiles, i, x, t) for i in config.active]
    if config.sis_active:
        g = profiles.gamma(t + config.h_last)
        terms.append(np.broadcast_to(g, (x.size, g.size)))
    if not terms:
        raise ConfigError("no active term: all chi flags are 0")
    return np.max(np.stack(terms), axis=0)


def initial_data(config: EntireConfig, profiles: Profiles, n, x):
    """φⁿ(x) = u̲(x, -n)."""
    return lower_envelope(config, profiles, x, -float(n))


def pi_bound(config: EntireConfig, spectral: SpectralData, x, t):
    """Π(x, t) = Σ χ_i v(λ₁(c_i))e^{λ₁(c_i)(xν_i + c_i t + h_i)} + χ_{l+1} v* e^{λ*(t + h_{l+1})}."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros((x.size, spectral.v_star.size))
    for i in config.active:
        w = config.waves[i]
        lam = spectral.lambda1(w.c)
        out += spectral.v(lam) * np.exp(lam * (x * w.nu + w.c * t + w.h))[:, None]
    if config.sis_active:
        out += spectral.v_star * math.exp(spectral.growth_rate * (t + config.h_last))
    return out


def upper_bound(config, spectral, model, x, t):
    cap = model.K if config.mode == COOPERATIVE else model.envelopes.K_plus
    return np.minimum(cap, pi_bound(config, spectral, x, t))


def vartheta(config, spectral):
    return min(config.waves[i].c * spectral.lambda1(config.waves[i].c) for i in config.active)


# ---------------------------------------------------------------------------
# geometry


def half_width(config: EntireConfig):
    if config.half_width is not None:
        return config.half_width
    cmax = max((w.c for w in config.waves), default=0.0)
    return cmax * (config.n_max + config.t_end) + 40.0


def window_bounds(config: EntireConfig, model: ModelSpec):
    X = half_width(config)
    if config.window is not None:
        return config.window
    cmax = max((w.c for w in config.waves), default=0.0)
    dmax = float(np.max(model.diffusion))
    buf = cmax * config.t_end + 6.0 * math.sqrt(dmax * config.t_end)
    if buf >= X:
        raise ConfigError("interior window is empty; enlarge half_width")
    return (-X + buf, X - buf)


def snapshot_times(config: EntireConfig, start):
    k0 = int(math.ceil(start / config.snapshot_step - 1e-9))
    k1 = int(math.floor(config.t_end / config.snapshot_step + 1e-9))
    return np.arange(k0, k1 + 1) * config.snapshot_step


# ---------------------------------------------------------------------------
# barrier realized by the scheme


class _Barrier:
    def __init__(self, config, profiles, model, grid, mode):
        self.config, self.profiles, self.grid = config, profiles, grid
        self.mode = mode
        self.bm = barrier_model(model, config)
        self.dt = config.dt
        self.t_start = -config.n_max
        x = grid.x
        self.xb = np.array([x[0], x[-1]])
        if mode == "scheme" and config.sis_active:
            self.gamma_h = self._uniform_orbit()
        self.initial = {}
        if mode == "scheme":
            self._evolve_fronts(model)

    def _uniform_orbit(self):
        cfg = self.config
        steps = n_steps(self.t_start, cfg.t_end, cfg.dt)
        g = np.empty((steps + 1, self.bm.m))
        g[0] = self.profiles.gamma(self.t_start + cfg.h_last)
        f = self.bm.reaction
        for k in range(steps):
            g[k + 1] = g[k] + cfg.dt * f(g[k])
        return g

    def gamma_at(self, t):
        if self.mode == "scheme":
            k = int(round((t - self.t_start) / self.dt))
            return self.gamma_h[k]
        return self.profiles.gamma(t + self.config.h_last)

    def _evolve_fronts(self, model):
        cfg = self.config
        x = self.grid.x
        pieces = {n: [] for n in cfg.n_schedule}
        for i in cfg.active:
            def bc(side, i=i):
                xs = x[0] if side == 0 else x[-1]
                return lambda t: front_term(cfg, self.profiles, i, [xs], t)[0]

            g = Grid(self.grid.x0, self.grid.dx, self.grid.n_nodes, bc(0), bc(1))
            u0 = front_term(cfg, self.profiles, i, x, self.t_start)
            stepper = Stepper(g, model, cfg.dt, reaction=self.bm.reaction, box=self.bm.K)
            u = u0.copy()
            t = self.t_start
            for n in sorted(cfg.n_schedule, reverse=True):
                for _ in range(n_steps(t, -n, cfg.dt)):
                    u = stepper.advance(u, t)
                    t += cfg.dt
                t = -n
                pieces[n].append(u.copy())
        self.front_pieces = pieces

    def initial_data(self, n):
        cfg = self.config
        if self.mode == "analytic":
            return initial_data(cfg, self.profiles, n, self.grid.x)
        terms = list(self.front_pieces[n])
        if cfg.sis_active:
            terms.append(np.broadcast_to(self.gamma_at(-n), (self.grid.n_nodes, self.bm.m)))
        return np.max(np.stack(terms), axis=0)

    def boundary(self, side):
        cfg = self.config
        xs = self.xb[side]

        def value(t):
            terms = [front_term(cfg, self.profiles, i, [xs], t)[0] for i in cfg.active]
            if cfg.sis_active:
                terms.append(self.gamma_at(t))
            return np.max(np.stack(terms), axis=0)

        return value


# ---------------------------------------------------------------------------
# construction


@dataclass
class SandwichReport:
    lower_margin: dict
    upper_margin: dict
    n_increments: list
    increments_decreasing: bool
    monotone_in_n_ok: bool
    monotone_in_n_min: float
    monotone_in_t_ok: bool
    monotone_in_t_min: float
    window: tuple
    mode: str
    tol: float
    tol_order: float
    per_run: list = field(default_factory=list)
    decay_diagnostics: dict = field(default_factory=dict)
    saturated_fraction: float = 0.0

    @property
    def sandwich_ok(self):
        return (self.lower_margin["value"] >= -self.tol
                and self.upper_margin["value"] >= -self.tol)

    @property
    def ok(self):
        return (self.sandwich_ok and self.monotone_in_n_ok and self.monotone_in_t_ok
                and self.increments_decreasing)

    def to_dict(self):
        d = asdict(self)
        d["sandwich_ok"] = self.sandwich_ok
        d["ok"] = self.ok
        return d


def _margin(diff, x, times, mask):
    """Minimum of ``diff`` (k, n, m) over window nodes, with its location."""
    sub = diff[:, mask]
    idx = np.unravel_index(int(np.argmin(sub)), sub.shape)
    return {"value": float(sub[idx]), "t": float(times[idx[0]]),
            "x": float(x[mask][idx[1]]), "component": int(idx[2])}


def _run_key(config, model, profiles, n, mode):
    cfg = asdict(config)
    cfg["waves"] = [w if on else None for w, on in zip(cfg["waves"], config.chi)]
    cfg.pop("n_schedule")
    cfg.pop("tol")
    cfg.pop("tol_order")
    return cache_key("entire-run", model.digest(), profiles.digest(), cfg, config.n_max, n, mode)


def construct(config: EntireConfig, model: ModelSpec, profiles: Profiles,
              spectral: SpectralData, cache: ArrayCache | None = None, barrier="scheme",
              raise_on_failure=True):
    """Run the n-schedule; return the largest-n trajectory and its SandwichReport."""
    config.validate(spectral, model)
    X = half_width(config)
    grid0 = Grid.symmetric(X, config.dx, None, None)
    bar = _Barrier(config, profiles, model, grid0, barrier)
    grid = Grid(grid0.x0, grid0.dx, grid0.n_nodes, bar.boundary(0), bar.boundary(1))
    x = grid.x
    wl, wr = window_bounds(config, model)
    mask = (x >= wl) & (x <= wr)
    coop = config.mode == COOPERATIVE

    runs = {}
    for n in config.n_schedule:
        key = _run_key(config, model, profiles, n, barrier)
        hit = cache.get(key) if cache is not None else None
        if hit is not None:
            runs[n] = Trajectory(x, hit["times"], hit["values"], meta={"cached": True})
            continue
        u0 = bar.initial_data(n)
        traj = solve_ivp(Field(grid, u0, -n), model, config.t_end, config.dt,
                         snapshots=snapshot_times(config, -n))
        runs[n] = traj
        if cache is not None:
            cache.put(key, times=traj.times, values=traj.values)

    # sandwich against the analytic bounds
    per_run, lows, ups = [], [], []
    for n, traj in runs.items():
        under = np.stack([lower_envelope(config, profiles, x, t) for t in traj.times])
        over = np.stack([upper_bound(config, spectral, model, x, t) for t in traj.times])
        lo = _margin(traj.values - under, x, traj.times, mask)
        hi = _margin(over - traj.values, x, traj.times, mask)
        per_run.append({"n": n, "lower_margin": lo, "upper_margin": hi})
        lows.append(lo)
        ups.append(hi)
    lower = min(lows, key=lambda m: m["value"])
    upper = min(ups, key=lambda m: m["value"])

    # ordering and Cauchy-in-n increments
    sched = list(config.n_schedule)
    common = snapshot_times(config, -sched[0])
    mono_min, increments = math.inf, []
    for a, b in zip(sched, sched[1:]):
        ta, tb = runs[a], runs[b]
        ia = np.searchsorted(ta.times, ta.times)  # all of a's snapshots are shared with b
        ib = np.searchsorted(np.round(tb.times, 9), np.round(ta.times, 9))
        diff = tb.values[ib] - ta.values[ia]
        mono_min = min(mono_min, float(np.min(diff)))
        ic_a = np.searchsorted(np.round(ta.times, 9), np.round(common, 9))
        ic_b = np.searchsorted(np.round(tb.times, 9), np.round(common, 9))
        inc = np.abs(tb.values[ic_b] - ta.values[ic_a])[:, mask]
        increments.append({"from": a, "to": b, "sup": float(np.max(inc))})
    sups = [d["sup"] for d in increments]
    decreasing = all(s2 <= s1 for s1, s2 in zip(sups, sups[1:]))
    mono_ok = (mono_min >= -config.tol_order) if coop else True

    final = runs[sched[-1]]
    tmin, sat = time_monotonicity(final, model, mask)
    report = SandwichReport(
        lower_margin=lower, upper_margin=upper, n_increments=increments,
        increments_decreasing=decreasing, monotone_in_n_ok=mono_ok,
        monotone_in_n_min=mono_min if sched[1:] else float("nan"),
        monotone_in_t_ok=(tmin > 0) if coop else True, monotone_in_t_min=tmin,
        window=(wl, wr), mode=config.mode, tol=config.tol, tol_order=config.tol_order,
        per_run=per_run, saturated_fraction=sat)
    report.decay_diagnostics = early_exponent(final, config, spectral, (wl, wr))
    final.meta.update(window=(wl, wr), n=sched[-1], barrier=barrier)
    if raise_on_failure:
        if coop and not mono_ok:
            raise SchemeError("Uⁿ is not nondecreasing in n", min_difference=mono_min,
                              report=report)
        if not report.sandwich_ok:
            worst = lower if lower["value"] < upper["value"] else upper
            raise ConstructionError("sandwich violated beyond tolerance", worst=worst,
                                    report=report)
    return final, report


def time_monotonicity(traj: Trajectory, model: ModelSpec, mask):
    """Minimum forward difference in t over the window, restricted to resolvable nodes.

    Where U has saturated to K in floating point the difference can only be 0; those
    nodes are required to be nondecreasing instead. Returns (min positive-part
    difference, saturated fraction); the first value is -inf if any saturated node
    decreases.
    """
    U = traj.values[:, mask]
    cap = np.asarray(model.state_box_upper if model.envelopes is None else model.K, float)
    d = np.diff(U, axis=0)
    live = (cap - U[1:]) > SATURATION * np.maximum(1.0, cap)
    if np.any(d[~live] < 0):
        return -math.inf, float(np.mean(~live))
    return (float(np.min(d[live])) if live.any() else math.nan), float(np.mean(~live))


# ---------------------------------------------------------------------------
# qualitative checks


def _probe_x(config, spectral, window, t_start):
    xs = np.linspace(window[0], window[1], 401)
    terms, rates = [], []
    for i in config.active:
        w = config.waves[i]
        lam = spectral.lambda1(w.c)
        terms.append(lam * (xs * w.nu + w.c * t_start + w.h))
        rates.append(w.c * lam)
    if config.sis_active:
        terms.append(np.full_like(xs, spectral.growth_rate * (t_start + config.h_last)))
        rates.append(spectral.growth_rate)
    logs = np.stack(terms)
    rates = np.array(rates)
    slow = rates <= rates.min() * (1 + 1e-9)
    peak = logs.max(axis=0)
    w = np.exp(logs - peak)
    share = w[slow].sum(axis=0) / w.sum(axis=0)
    best = np.flatnonzero(share >= share.max() * (1 - 1e-12))
    return float(xs[best[np.argmin(np.abs(xs[best]))]])


def early_exponent(traj: Trajectory, config: EntireConfig, spectral: SpectralData, window,
                   x_probe=None):
    """Log-linear fit of U(x_probe, t) over the earliest snapshots t ∈ [-n+1, -n/2].

    Without an explicit probe, x is chosen in the window where the slowest-decaying
    term of Π carries the largest share at the start of the fit.
    """
    n = config.n_max
    t_lo, t_hi = -n + 1.0, -n / 2.0
    expected = spectral.growth_rate if config.sis_active else vartheta(config, spectral)
    if x_probe is None:
        x_probe = _probe_x(config, spectral, window, t_lo)
    j = int(np.argmin(np.abs(traj.x - x_probe)))
    sel = (traj.times >= t_lo - 1e-9) & (traj.times <= t_hi + 1e-9)
    t = traj.times[sel]
    out = {"x": float(traj.x[j]), "t_range": (t_lo, t_hi), "expected": expected,
           "expected_kind": "growth_rate" if config.sis_active else "vartheta",
           "points": int(t.size)}
    if t.size < 2:
        # schedule too short for a fit
        return dict(out, slopes=[], relative_errors=[], ok=False)
    slopes = [float(np.polyfit(t, np.log(traj.values[sel, j, i]), 1)[0])
              for i in range(traj.values.shape[2])]
    rel = [s / expected - 1.0 for s in slopes]
    return dict(out, slopes=slopes, relative_errors=rel,
                ok=bool(max(abs(r) for r in rel) <= 0.05))


def verify_qualitative(traj: Trajectory, config: EntireConfig, spectral: SpectralData,
                       model: ModelSpec, radius=10.0, x_probe=None):
    window = traj.meta.get("window") or window_bounds(config, model)
    x = traj.x
    mask = (x >= window[0]) & (x <= window[1])
    U = traj.values[:, mask]
    K = model.K if config.mode == COOPERATIVE else model.envelopes.K_plus
    positive = bool(np.all(U > 0))
    below = bool(np.all(U <= K))
    strictly_below = float(np.mean(U < K))
    tmin, sat = time_monotonicity(traj, model, mask)
    # smallness as t -> -inf: the ball sup-norm grows over the earliest snapshots and is
    # dominated by the sup of min{K, Π}, which vanishes as t -> -inf
    ball = np.abs(x) <= radius
    early = np.max(traj.values[:, ball], axis=(1, 2))
    k = min(4, len(early))
    bound = [float(np.max(upper_bound(config, spectral, model, x[ball], t)))
             for t in traj.times[:k]]
    small = bool(np.all(np.diff(early[:k]) > 0)
                 and np.all(early[:k] <= np.array(bound) + config.tol))
    gap_end = float(np.max(np.abs(traj.values[-1][mask] - model.K)))
    report = {
        "positivity": {"ok": positive},
        "below_K": {"ok": below, "strict_fraction": strictly_below},
        "time_monotone": {"ok": (tmin > 0) if config.mode == COOPERATIVE else True,
                          "min_forward_difference": tmin, "saturated_fraction": sat},
        "early_exponent": early_exponent(traj, config, spectral, window, x_probe),
        "small_at_minus_infinity": {"ok": small, "sup_norm_earliest": early[:k].tolist(),
                                    "bound_earliest": bound, "radius": radius},
        "approach_K": {"ok": gap_end <= APPROACH_TOL if config.mode == COOPERATIVE else True,
                       "sup_gap_at_t_end": gap_end, "t_end": float(traj.times[-1])},
    }
    if config.mode == NONCOOPERATIVE:
        Km = model.envelopes.K_minus
        low = traj.values[-1][mask].min(axis=0)
        report["lower_limit"] = {"ok": bool(np.all(low >= Km - APPROACH_TOL)),
                                 "min_at_t_end": low.tolist(), "K_minus": Km.tolist()}
    report["ok"] = all(v.get("ok", True) for v in report.values())
    return report


def monotone_in_h(config: EntireConfig, model, profiles, spectral, delta_h, which=0,
                  cache=None, tol=None):
    """Compare constructions at h and h + δ for wave ``which`` (or ``"last"`` for h_{l+1})."""
    if which == "last":
        shifted = replace(config, h_last=config.h_last + delta_h)
    else:
        waves = list(config.waves)
        waves[which] = replace(waves[which], h=waves[which].h + delta_h)
        shifted = replace(config, waves=tuple(waves))
    base, _ = construct(config, model, profiles, spectral, cache)
    moved, _ = construct(shifted, model, profiles, spectral, cache)
    diff = moved.values - base.values
    tol = config.tol_order if tol is None else tol
    worst = float(np.min(diff))
    return {"ok": worst >= -tol, "min_difference": worst, "delta_h": delta_h,
            "which": which, "identical": bool(np.array_equal(base.values, moved.values))}


def diff_bound(config_p0: EntireConfig, config_p1: EntireConfig, runs, spectral: SpectralData,
               model: ModelSpec, tol=None, check_hypothesis=True):
    """Check 0 ≤ U_{p0} - U_{p1} ≤ v(λ₁)e^{λ₁(xν₁+c₁t+h₁)} + tol on the shared snapshots.

    ``config_p1`` must equal ``config_p0`` with exactly one front flag switched off;
    ``runs`` is the pair of trajectories (p0, p1).
    """
    off = [i for i in range(config_p0.l) if config_p0.chi[i] and not config_p1.chi[i]]
    same = replace(config_p1, chi=config_p0.chi) == config_p0
    identical = config_p1 == config_p0
    if not identical and (len(off) != 1 or not same
                          or config_p1.chi[config_p0.l] != config_p0.chi[config_p0.l]):
        raise ConfigError("p1 must equal p0 with a single front flag zeroed")
    wave = off[0] if off else None
    if check_hypothesis:
        worst, at = jacobian_bound_violation(model)
        if worst > 1e-6:
            raise HypothesisError("f'(u) <= f'(0) fails", point=at.tolist(), excess=worst)
    traj_p0, traj_p1 = runs
    tol = config_p0.tol if tol is None else tol
    window = traj_p0.meta.get("window") or window_bounds(config_p0, model)
    x = traj_p0.x
    mask = (x >= window[0]) & (x <= window[1])
    shared, i0, i1 = np.intersect1d(np.round(traj_p0.times, 9), np.round(traj_p1.times, 9),
                                    return_indices=True)
    D = traj_p0.values[i0] - traj_p1.values[i1]
    if wave is None:
        env = np.zeros_like(D)
        left = mask
        h = None
    else:
        w = config_p0.waves[wave]
        lam = spectral.lambda1(w.c)
        v = spectral.v(lam)
        env = np.stack([v * np.exp(lam * (x * w.nu + w.c * t + w.h))[:, None] for t in shared])
        left = mask & (x * w.nu <= 0)
        h = w.h
    Dw, Ew = D[:, mask], env[:, mask]
    lower = float(np.min(Dw))
    upper = float(np.min(Ew + tol - Dw))
    sup_left = float(np.max(D[:, left])) if left.any() else math.nan
    return {"ok": lower >= -config_p0.tol_order and upper >= 0.0, "min_difference": lower,
            "max_abs_difference": float(np.max(np.abs(Dw))), "bound_margin": upper,
            "sup_difference_left": sup_left, "wave": wave, "h": h,
            "snapshots": int(shared.size)}
