"""The spatially independent solution Γ: a heteroclinic orbit 0 → K of u' = f(u).

Γ is obtained by monotone iteration of

    F(u)(t) = ∫_{-∞}^t e^{-L(t-s)} (f(u(s)) + L u(s)) ds

started from the supersolution min{K, v* e^{λt}}, where λ = M(0). The integral is
discretized by a product rule that interpolates the integrand in span{1, e^{λs}} on
each cell. The weights are positive, so the discrete map stays order-preserving, and
the rule is exact on v* e^{λt}, so the starting supersolution stays a discrete
supersolution.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from .errors import ConvergenceError, DomainError, GridError, SchemeError
from .model import ModelSpec
from .profile import Profile
from .spectral import SpectralData

T0 = -40.0
T1 = 40.0
DT = 0.0025
MAX_SWEEPS = 10_000
MAX_T1 = 640.0
SATURATION = 1e-12


def sub_super_pair(spectral: SpectralData, K, epsilon=1.5, q=2.0, t=None):
    """Explicit super/subsolutions min{K, v*e^{λt}} and max{0, v*e^{λt} - q v*e^{ελt}}."""
    if not 1.0 < epsilon < 2.0:
        raise DomainError(f"epsilon must lie in (1, 2), got {epsilon}")
    if not q > 1.0:
        raise DomainError(f"q must exceed 1, got {q}")
    t = np.atleast_1d(np.asarray(T0 + DT * np.arange(int(round((T1 - T0) / DT)) + 1)
                                 if t is None else t, dtype=float))
    lam, vs = spectral.growth_rate, spectral.v_star
    K = np.asarray(K, dtype=float)
    base = np.exp(lam * t)[:, None] * vs
    upper = np.minimum(K, base)
    lower = np.maximum(0.0, base - q * np.exp(epsilon * lam * t)[:, None] * vs)
    return upper, lower


class _IntegralMap:
    def __init__(self, model, lam, v_star, t, L):
        self.f = model.reaction
        self.L = L
        h = t[1] - t[0]
        E, eL = np.exp(lam * h), np.exp(-L * h)
        a1 = (1.0 - eL) / L
        a2 = (E - eL) / (lam + L)
        self.w1 = (a2 - a1) / (E - 1.0)
        self.w0 = a1 - self.w1
        self.eL = eL
        self.tail = v_star * np.exp(lam * t[0])

    def __call__(self, u):
        Q = self.f(u.T).T + self.L * u
        b = np.empty_like(u)
        b[0] = self.tail
        b[1:] = self.w0 * Q[:-1] + self.w1 * Q[1:]
        return lfilter([1.0], [1.0, -self.eL], b, axis=0)


def _iterate(Fmap, start, tol, guard):
    u = start
    for sweep in range(1, MAX_SWEEPS + 1):
        Fu = Fmap(u)
        excess = np.max(Fu - u)
        if excess > guard:
            raise SchemeError("monotone iteration increased", sweep=sweep, excess=float(excess))
        new = np.minimum(Fu, u)
        inc = np.max(np.abs(new - u))
        u = new
        if inc < tol:
            return u, sweep, inc
    raise ConvergenceError("monotone iteration stalled", increment=float(inc))


def compute_gamma(model: ModelSpec, spectral: SpectralData, tol=1e-12, *, t0=T0, t1=T1, dt=DT,
                  epsilon=1.5, q=2.0) -> Profile:
    """Γ for a cooperative model. Pass ``model.lower()`` for the envelope solution Γ⁻."""
    if not model.cooperative:
        raise DomainError("compute_gamma needs a cooperative reaction; use model.lower()")
    lam, vs, K = spectral.growth_rate, spectral.v_star, model.K
    L = model.lipschitz_L
    guard = 1e-12 * max(1.0, float(np.max(K)))
    while True:
        n = int(round((t1 - t0) / dt)) + 1
        t = t0 + dt * np.arange(n)
        Fmap = _IntegralMap(model, lam, vs, t, L)
        upper, _ = sub_super_pair(spectral, K, epsilon, q, t)
        u, sweeps, inc = _iterate(Fmap, upper, tol, guard)
        if np.max(np.abs(u[-1] - K)) <= 10 * tol:
            break
        if t1 >= MAX_T1:
            raise GridError("Γ does not reach K on the grid", gap=float(np.max(np.abs(u[-1] - K))))
        t1 = min(2.0 * t1, MAX_T1)

    qq = q
    while True:
        _, lower = sub_super_pair(spectral, K, epsilon, qq, t)
        if np.all(Fmap(lower) >= lower - guard):
            break
        qq *= 2.0
        if qq > 2.0 ** 10:
            raise ConvergenceError("no admissible subsolution with q <= 2^10")
    if np.any(u < lower - guard) or np.any(u > upper + guard):
        raise SchemeError("Γ left the sub/supersolution sandwich")
    meta = dict(sweeps=sweeps, increment=float(inc), q=qq, epsilon=epsilon, L=L, tol=tol)
    return Profile(t0=t0, dt=dt, values=u, decay_meta=(lam, vs.copy()), right_limit=K.copy(),
                   meta=meta)


def resolvable(u, K):
    """Nodes where ``K - u`` is resolvable in double precision."""
    K = np.asarray(K, dtype=float)
    return (K - u) > SATURATION * np.maximum(1.0, np.abs(K))


def verify_gamma(model: ModelSpec, gamma: Profile, tol_res=None, tail_t=None, tail_tol=0.02):
    """Residual, monotonicity, upper-bound and tail checks; returns a report dict.

    The tail ratio is tested on ``t <= tail_t``, by default where ``λt <= -10``.

    Envelope reactions are only piecewise smooth, so the centered residual is O(dt) at
    their kinks; ``tol_res`` defaults to a looser value for them.
    """
    if tol_res is None:
        tol_res = 5e-4 if "_envelope" in model.params else 1e-5
    u, h, t = gamma.values, gamma.dt, gamma.grid
    rate, amp = gamma.decay_meta
    if tail_t is None:
        tail_t = -10.0 / rate
    deriv = (u[2:] - u[:-2]) / (2 * h)
    resid = np.abs(deriv - model.reaction(u[1:-1].T).T)
    worst = int(np.argmax(resid.max(axis=1))) + 1
    res_max = float(resid.max())
    diff = np.diff(u, axis=0)
    live = resolvable(u[:-1], gamma.right_limit)
    dmin = float(np.min(diff[live])) if live.any() else float("nan")
    dmin_all = float(np.min(diff))
    bound = np.exp(rate * t)[:, None] * amp
    excess = float(np.max(u - bound))
    mask = t <= tail_t
    ratio = u[mask] * np.exp(-rate * t[mask])[:, None] / amp
    tail_dev = float(np.max(np.abs(ratio - 1.0))) if mask.any() else float("nan")
    checks = {
        "residual": {"ok": res_max <= tol_res, "max": res_max, "at_t": float(t[worst])},
        "monotone": {"ok": bool(dmin > 0 and dmin_all >= 0), "min_forward_difference": dmin,
                     "min_saturated_difference": dmin_all},
        "upper_bound": {"ok": excess <= 0.0, "max_excess": excess},
        "tail_ratio": {"ok": bool(mask.any() and tail_dev <= tail_tol), "max_deviation": tail_dev},
        "limits": {"ok": bool(np.max(np.abs(u[-1] - gamma.right_limit)) <= 1e-6
                              and np.max(u[0]) <= 1e-3),
                   "left": u[0].tolist(), "right": u[-1].tolist()},
    }
    checks["ok"] = all(c["ok"] for c in checks.values())
    return checks
