"""Reaction-diffusion model specifications and the builtin application models.

A reaction is a callable taking an array of shape ``(m, ...)`` and returning
an array of the same shape, so it can be evaluated on a single state, a grid
of states, or a batch of grids without Python loops.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.stats import qmc

from .errors import AssumptionError, EnvelopeError, ParameterError
from .roots import bisect, bracketed_root

Reaction = Callable[[np.ndarray], np.ndarray]

EQ_TOL = 1e-10
FD_STEP = 1e-6
LIPSCHITZ_SAFETY = 1.25


@dataclass(frozen=True, eq=False)
class EnvelopePair:
    f_minus: Reaction
    f_plus: Reaction
    K_minus: np.ndarray
    K_plus: np.ndarray


@dataclass(frozen=True, eq=False)
class ModelSpec:
    name: str
    kind: str
    diffusion: np.ndarray
    reaction: Reaction
    jacobian0: np.ndarray
    K: np.ndarray
    state_box_upper: np.ndarray
    lipschitz_L: float
    params: Mapping = field(default_factory=dict)
    cooperative: bool = True
    envelopes: Optional[EnvelopePair] = None
    info: Mapping = field(default_factory=dict)

    @property
    def m(self) -> int:
        return int(self.diffusion.size)

    def f(self, u):
        """Evaluate the reaction on a single state vector."""
        return np.asarray(self.reaction(np.asarray(u, dtype=float)), dtype=float)

    def digest(self) -> str:
        blob = json.dumps({"kind": self.kind, "name": self.name, "params": _jsonable(self.params)},
                          sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def lower(self) -> "ModelSpec":
        """The lower envelope system f⁻ with equilibrium K⁻ (itself when cooperative)."""
        if self.envelopes is None:
            return self
        env = self.envelopes
        return replace(self, name=self.name + ":lower", reaction=env.f_minus, K=env.K_minus,
                       state_box_upper=env.K_minus, cooperative=True, envelopes=None,
                       params={**self.params, "_envelope": "lower"})

    def upper(self) -> "ModelSpec":
        if self.envelopes is None:
            return self
        env = self.envelopes
        return replace(self, name=self.name + ":upper", reaction=env.f_plus, K=env.K_plus,
                       state_box_upper=env.K_plus, cooperative=True, envelopes=None,
                       params={**self.params, "_envelope": "upper"})


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# numerical helpers


def fd_jacobian(reaction: Reaction, u, step=FD_STEP):
    """Central-difference Jacobian.

    ``u`` has shape ``(m,)`` or ``(m, n)``; the result has shape ``(m, m)`` or
    ``(m, m, n)`` with ``J[i, j] = d f_i / d u_j``.
    """
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    if single:
        u = u[:, None]
    m = u.shape[0]
    J = np.empty((m, m) + u.shape[1:])
    for j in range(m):
        h = step * np.maximum(1.0, np.abs(u[j]))
        up, dn = u.copy(), u.copy()
        up[j] += h
        dn[j] -= h
        J[:, j] = (reaction(up) - reaction(dn)) / (2.0 * h)
    return J[..., 0] if single else J


def box_grid(upper, per_dim=64, max_points=1 << 18, seed=0):
    """Points covering ``[0, upper]``: a tensor grid when affordable, Sobol points otherwise."""
    upper = np.asarray(upper, dtype=float)
    m = upper.size
    if per_dim ** m <= max_points:
        axes = [np.linspace(0.0, b, per_dim) for b in upper]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([a.ravel() for a in mesh])
    pts = qmc.Sobol(m, scramble=True, seed=seed).random(max_points)
    return (pts * upper).T


def estimate_lipschitz(reactions, upper, per_dim=64):
    """Sampled ``max |d f_i / d u_i|`` over the box, times a safety factor."""
    pts = box_grid(upper, per_dim)
    best = 0.0
    for f in reactions:
        J = fd_jacobian(f, pts)
        diag = np.abs(np.einsum("iin->in", J))
        best = max(best, float(diag.max()))
    return LIPSCHITZ_SAFETY * max(best, 1e-12)


def _check_equilibria(reaction, K, name):
    z = reaction(np.zeros_like(K))
    if np.max(np.abs(z)) != 0.0:
        raise AssumptionError(f"{name}: f(0) != 0", residual=z.tolist())
    r = reaction(K)
    if np.max(np.abs(r)) > EQ_TOL:
        raise AssumptionError(f"{name}: |f(K)| = {np.max(np.abs(r)):.3e} exceeds {EQ_TOL}")


def _positive(**kw):
    for key, val in kw.items():
        if not (isinstance(val, (int, float, np.floating)) and math.isfinite(val) and val > 0):
            raise ParameterError(f"parameter {key} must be positive, got {val!r}")


def _finish(name, kind, d, reaction, jac0, K, params, *, cooperative=True, envelopes=None,
            info=None):
    d = np.asarray(d, dtype=float)
    K = np.asarray(K, dtype=float)
    jac0 = np.asarray(jac0, dtype=float)
    _check_equilibria(reaction, K, name)
    if envelopes is None:
        box = K
        L = estimate_lipschitz([reaction], box)
    else:
        box = np.asarray(envelopes.K_plus, dtype=float)
        L = estimate_lipschitz([reaction, envelopes.f_minus, envelopes.f_plus], box)
    return ModelSpec(name=name, kind=kind, diffusion=d, reaction=reaction, jacobian0=jac0, K=K,
                     state_box_upper=box, lipschitz_L=L, params=dict(params),
                     cooperative=cooperative, envelopes=envelopes, info=dict(info or {}))


# ---------------------------------------------------------------------------
# buffered system


def make_buffered(d1, d2, k1, k2, b) -> ModelSpec:
    _positive(d1=d1, d2=d2, k1=k1, k2=k2, b=b)

    def reaction(w):
        w1, w2 = w[0], w[1]
        return np.stack([w1 * (1.0 - w1) + k1 * w2 - k2 * w1 * (b - w2),
                         -k1 * w2 + k2 * w1 * (b - w2)])

    K = [1.0, k2 * b / (k2 + k1)]
    jac0 = [[1.0 - k2 * b, k1], [k2 * b, -k1]]
    params = dict(d1=d1, d2=d2, k1=k1, k2=k2, b=b)
    return _finish("buffered", "buffered", [d1, d2], reaction, jac0, K, params)


# ---------------------------------------------------------------------------
# epidemic model


def _g_family(g_kind, omega, nu):
    if g_kind == "g1":
        return lambda u: omega * u / (1.0 + nu * u), math.inf
    if g_kind == "g2":
        return lambda u: omega * u / (1.0 + nu * u * u), 1.0 / math.sqrt(nu)
    raise ParameterError(f"g_kind must be 'g1' or 'g2', got {g_kind!r}")


def _epidemic_reaction(gamma, beta, g):
    def reaction(u):
        u1, u2 = u[0], u[1]
        return np.stack([-u1 + gamma * u2, -beta * u2 + g(u1)])

    return reaction


def make_epidemic(d1, d2, gamma, beta, g_kind, omega, nu) -> ModelSpec:
    _positive(d1=d1, d2=d2, gamma=gamma, beta=beta, omega=omega, nu=nu)
    g, u_max = _g_family(g_kind, omega, nu)
    if omega * gamma <= beta:
        raise AssumptionError("omega*gamma <= beta: no positive equilibrium")
    ratio = (omega * gamma - beta) / (beta * nu)
    k = ratio if g_kind == "g1" else math.sqrt(ratio)
    K = [k, g(k) / beta]
    jac0 = [[-1.0, gamma], [omega, -beta]]
    params = dict(d1=d1, d2=d2, gamma=gamma, beta=beta, g_kind=g_kind, omega=omega, nu=nu)
    cooperative = k <= u_max
    info = dict(k=k, u_max=u_max)
    reaction = _epidemic_reaction(gamma, beta, g)
    base = _finish(f"epidemic-{g_kind}", "epidemic", [d1, d2], reaction, jac0, K, params,
                   cooperative=cooperative, info=info)
    if cooperative:
        return base
    env = build_envelopes_epidemic(base)
    return _finish(base.name, "epidemic", [d1, d2], reaction, jac0, K, params,
                   cooperative=False, envelopes=env, info={**info, **_env_info(env)})


def _env_info(env):
    return {"K_minus": np.asarray(env.K_minus).tolist(), "K_plus": np.asarray(env.K_plus).tolist(),
            **getattr(env, "_extra", {})}


def build_envelopes_epidemic(model: ModelSpec) -> EnvelopePair:
    if model.kind != "epidemic":
        raise EnvelopeError("epidemic envelopes need an epidemic model")
    p = model.params
    g, u_max = _g_family(p["g_kind"], p["omega"], p["nu"])
    if model.info["k"] <= u_max:
        raise EnvelopeError("model is cooperative on [0, K]; envelopes are not needed")
    gamma, beta = p["gamma"], p["beta"]
    g_top = g(u_max)
    target = g(gamma / beta * g_top)
    u_min = bisect(lambda u: g(u) - target, 1e-8, u_max, tol=1e-15)
    g_low = g(u_min)

    def g_plus(u):
        return np.where(u <= u_max, g(np.minimum(u, u_max)), g_top)

    def g_minus(u):
        return np.where(u <= u_min, g(np.minimum(u, u_min)), g_low)

    K_plus = np.array([gamma / beta * g_top, g_top / beta])
    K_minus = np.array([gamma / beta * g_low, g_low / beta])
    env = EnvelopePair(_epidemic_reaction(gamma, beta, g_minus),
                       _epidemic_reaction(gamma, beta, g_plus), K_minus, K_plus)
    object.__setattr__(env, "_extra", {"u_min": u_min})
    return env


# ---------------------------------------------------------------------------
# population model


def _population_reaction(r1, r2, alpha, delta, h):
    def reaction(w):
        w1, w2 = w[0], w[1]
        return np.stack([w1 * (r1 - alpha - delta * w1 + r1 * w2),
                         r2 * (1.0 + w2) * (-w2 + h(w1))])

    return reaction


def _ricker(w):
    return w * np.exp(-w)


def make_population(d1, d2, r1, r2, alpha, delta) -> ModelSpec:
    _positive(d1=d1, d2=d2, r1=r1, r2=r2, alpha=alpha, delta=delta)
    if not r1 > alpha:
        raise AssumptionError("condition r1 > alpha violated")
    if not d1 >= d2:
        raise AssumptionError("condition d1 >= d2 violated")
    if not delta >= r1 * r2 / (r1 + r2 - alpha):
        raise AssumptionError("condition delta >= r1*r2/(r1+r2-alpha) violated")
    K1 = bracketed_root(lambda k: r1 * k * math.exp(-k) - delta * k - alpha + r1)
    K = [K1, K1 * math.exp(-K1)]
    jac0 = [[r1 - alpha, 0.0], [r2, -r2]]
    params = dict(d1=d1, d2=d2, r1=r1, r2=r2, alpha=alpha, delta=delta)
    reaction = _population_reaction(r1, r2, alpha, delta, _ricker)
    cooperative = K1 <= 1.0
    info = dict(K1=K1)
    base = _finish("population", "population", [d1, d2], reaction, jac0, K, params,
                   cooperative=cooperative, info=info)
    if cooperative:
        return base
    env = build_envelopes_population(base)
    return _finish("population", "population", [d1, d2], reaction, jac0, K, params,
                   cooperative=False, envelopes=env, info={**info, **_env_info(env)})


def build_envelopes_population(model: ModelSpec) -> EnvelopePair:
    if model.kind != "population":
        raise EnvelopeError("population envelopes need a population model")
    K1 = model.info["K1"]
    if K1 <= 1.0:
        raise EnvelopeError("model is cooperative on [0, K]; envelopes are not needed")
    p = model.params
    r1, r2, alpha, delta = p["r1"], p["r2"], p["alpha"], p["delta"]
    cap = math.exp(-1.0)

    def h_plus_scalar(w):
        return w * math.exp(-w) if w <= 1.0 else cap

    # The root K1+ lies above K1, so scan upward from K1.
    g_plus = lambda k: delta * k + alpha - r1 - r1 * h_plus_scalar(k)
    lo = K1
    hi = K1
    while g_plus(hi) <= 0.0:
        lo, hi = hi, 2.0 * hi
    K1p = bisect(g_plus, lo, hi, tol=1e-15)
    floor = K1p * math.exp(-K1p)
    h0 = bisect(lambda h: h * math.exp(-h) - floor, 1e-8, 1.0, tol=1e-15)

    def h_minus_scalar(w):
        return w * math.exp(-w) if w <= h0 else floor

    K1m = bracketed_root(lambda k: delta * k + alpha - r1 - r1 * h_minus_scalar(k))

    def h_plus(w):
        return np.where(w <= 1.0, _ricker(np.minimum(w, 1.0)), cap)

    def h_minus(w):
        return np.where(w <= h0, _ricker(np.minimum(w, h0)), floor)

    # Second components are the h-envelope values so that f±(K±) = 0 holds.
    K_plus = np.array([K1p, h_plus_scalar(K1p)])
    K_minus = np.array([K1m, h_minus_scalar(K1m)])
    env = EnvelopePair(_population_reaction(r1, r2, alpha, delta, h_minus),
                       _population_reaction(r1, r2, alpha, delta, h_plus), K_minus, K_plus)
    object.__setattr__(env, "_extra", {"K1_plus": K1p, "K1_minus": K1m, "h0": h0})
    return env


# ---------------------------------------------------------------------------
# custom models


def make_custom(name, diffusion, reaction, K, jacobian0=None, params=None) -> ModelSpec:
    """Wrap a user reaction. ``jacobian0`` defaults to a central finite difference at 0."""
    d = np.atleast_1d(np.asarray(diffusion, dtype=float))
    if np.any(d <= 0):
        raise ParameterError("diffusion coefficients must be positive")
    K = np.atleast_1d(np.asarray(K, dtype=float))
    if jacobian0 is None:
        jacobian0 = fd_jacobian(reaction, np.zeros_like(K))
    return _finish(name, "custom", d, reaction, np.atleast_2d(jacobian0), K,
                   {"registry": name, **(params or {})})


def _fisher(d=1.0, r=1.0):
    _positive(d=d, r=r)
    return make_custom("fisher", [d], lambda u: r * u * (1.0 - u), [1.0], [[r]],
                       params=dict(d=d, r=r))


def _two_species(d1=1.0, d2=0.5, a=0.5):
    # Symmetric coupling u_i' = u_i(1 - u_i) + a(u_j - u_i): cooperative, K = (1, 1).
    _positive(d1=d1, d2=d2, a=a)

    def reaction(u):
        u1, u2 = u[0], u[1]
        return np.stack([u1 * (1 - u1) + a * (u2 - u1), u2 * (1 - u2) + a * (u1 - u2)])

    return make_custom("two_species", [d1, d2], reaction, [1.0, 1.0],
                       [[1.0 - a, a], [a, 1.0 - a]], params=dict(d1=d1, d2=d2, a=a))


CUSTOM_REGISTRY: dict[str, Callable[..., ModelSpec]] = {
    "fisher": _fisher,
    "two_species": _two_species,
}


def make_model(kind: str, parameters: Mapping) -> ModelSpec:
    """Build a model from a configuration block."""
    params = dict(parameters)
    try:
        if kind == "buffered":
            return make_buffered(**params)
        if kind == "epidemic":
            return make_epidemic(**params)
        if kind == "population":
            return make_population(**params)
        if kind == "custom":
            entry = params.pop("registry", None)
            if entry not in CUSTOM_REGISTRY:
                raise ParameterError(f"unknown custom model {entry!r}; "
                                     f"available: {sorted(CUSTOM_REGISTRY)}")
            return CUSTOM_REGISTRY[entry](**params)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {kind} model: {exc}") from None
    raise ParameterError(f"unknown model kind {kind!r}")
