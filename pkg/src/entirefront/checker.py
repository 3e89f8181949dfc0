"""Sampling verifiers for the structural hypotheses of a model.

Every verdict is one of ``pass``, ``fail`` or ``heuristic-pass``. The last one marks
statements that quantify over an unbounded family (all k, all ρ) or over a continuum
that can only be sampled. Failures always carry a concrete point that can be replayed.
Samples come from scrambled Halton sequences, so verdicts are deterministic for a
given seed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import root
from scipy.stats import qmc

from .errors import ArtifactError
from .model import ModelSpec, fd_jacobian
from .spectral import SpectralData, assemble_A, compute_cstar, principal_eigenpair

PASS = "pass"
FAIL = "fail"
HEURISTIC = "heuristic-pass"

COOP_TOL = -1e-8
SUBHOMOG_TOL = 1e-9
ORDER_TOL = 1e-12
LAMBDA_GRID = 1025


@dataclass
class Verdict:
    status: str
    samples_used: int = 0
    counterexample: Optional[dict] = None
    detail: dict = field(default_factory=dict)
    enforced: bool = True

    def __post_init__(self):
        if self.status == FAIL and self.counterexample is None:
            raise ValueError("a failing verdict needs a counterexample")


@dataclass
class AssumptionReport:
    entries: dict = field(default_factory=dict)

    def add(self, name, verdict: Verdict):
        self.entries[name] = verdict
        return self

    def merge(self, other: "AssumptionReport"):
        self.entries.update(other.entries)
        return self

    @property
    def hard_failures(self):
        return [k for k, v in self.entries.items() if v.status == FAIL and v.enforced]

    @property
    def ok(self):
        return not self.hard_failures

    @property
    def samples_used(self):
        return sum(v.samples_used for v in self.entries.values())

    def status(self, name):
        return self.entries[name].status

    def to_dict(self):
        return {"ok": self.ok, "entries": {k: asdict(v) for k, v in self.entries.items()}}

    def table(self):
        rows = [f"{'check':<44} {'status':<15} {'samples':>8}  note"]
        for k, v in self.entries.items():
            note = "" if v.enforced else "(reported only)"
            if v.counterexample is not None:
                ce = v.counterexample
                note = f"{ce.get('inequality', '')} margin={ce.get('margin', float('nan')):.3g} {note}"
            rows.append(f"{k:<44} {v.status:<15} {v.samples_used:>8}  {note}".rstrip())
        return "\n".join(rows)


def _halton(dim, n, seed):
    return qmc.Halton(dim, scramble=True, seed=seed).random(n)


def _box_samples(upper, n, seed):
    upper = np.asarray(upper, float)
    return (_halton(upper.size, n, seed) * upper).T  # (m, n)


# ---------------------------------------------------------------------------
# (A2) / (A4)'


def check_cooperative(reaction, box, samples=4096, seed=0, name="cooperative"):
    """Off-diagonal partials ∂_j f_i ≥ 0 at sample points of [0, box]."""
    pts = _box_samples(box, samples, seed)
    J = fd_jacobian(reaction, pts)
    m = J.shape[0]
    off = J.copy()
    off[np.arange(m), np.arange(m)] = np.inf
    k = np.unravel_index(int(np.argmin(off)), off.shape)
    worst = float(off[k])
    if worst < COOP_TOL:
        i, j, n = k
        return Verdict(FAIL, samples, {"point": pts[:, n].tolist(),
                                       "inequality": f"d f_{i + 1}/d u_{j + 1} >= 0",
                                       "margin": worst})
    return Verdict(PASS, samples, detail={"min_offdiagonal": worst if m > 1 else None})


# ---------------------------------------------------------------------------
# (A3) / (A3)* / (A5)' / (A5)*


def _v_table(spectral, lam_top):
    lams = np.linspace(0.0, lam_top, LAMBDA_GRID)
    return lams, np.array([spectral.v(float(x)) for x in lams])


def check_subhomog(reaction_plus, spectral: SpectralData, K_upper, k_max=4, samples=10_000,
                   seed=0, capped=True, rho_max=None, name="subhomogeneity"):
    """f(min{K, z}) ≤ f'(0) z for z = Σ_{j≤k} ρ_j v(λ_j), k = 1..k_max.

    ``capped=False`` tests the variant without the min (reaction defined on the whole
    positive cone). λ_j is drawn from a uniform grid on [0, max(λ_*, M(0))] where v is
    tabulated; ρ_j is log-uniform on [1e-6, 1]·ρ_max with ρ_max = 10‖K‖_∞.
    """
    K = np.asarray(K_upper, float)
    J0 = spectral.model.jacobian0
    lam_top = max(spectral.lambda_star, spectral.growth_rate)
    lams, vtab = _v_table(spectral, lam_top)
    rho_max = 10.0 * float(np.max(K)) if rho_max is None else rho_max
    used, worst = 0, -math.inf
    for k in range(1, k_max + 1):
        u = _halton(2 * k, samples, seed + k)
        rho = rho_max * 10.0 ** (-6.0 * u[:, :k])
        idx = np.minimum((u[:, k:] * LAMBDA_GRID).astype(int), LAMBDA_GRID - 1)
        z = np.einsum("nj,njm->nm", rho, vtab[idx])
        arg = np.minimum(K, z) if capped else z
        lhs = reaction_plus(arg.T).T
        rhs = z @ J0.T
        excess = lhs - rhs
        n, i = np.unravel_index(int(np.argmax(excess)), excess.shape)
        used += samples
        worst = max(worst, float(excess[n, i]))
        if excess[n, i] > SUBHOMOG_TOL:
            return Verdict(FAIL, used, {
                "point": arg[n].tolist(), "z": z[n].tolist(), "k": k,
                "rho": rho[n].tolist(), "lambda": lams[idx[n]].tolist(),
                "inequality": f"f_{i + 1}({'min{K,z}' if capped else 'z'}) <= (f'(0)z)_{i + 1}",
                "margin": -float(excess[n, i])})
    return Verdict(HEURISTIC, used, detail={"k_max": k_max, "rho_max": rho_max,
                                            "lambda_range": [0.0, lam_top],
                                            "max_excess": worst, "capped": capped})


# ---------------------------------------------------------------------------
# (A2)'


def check_envelope_order(model: ModelSpec, envelopes=None, samples=10_000, seed=0):
    """f⁻ ≤ f ≤ f⁺ on [0, K⁺] plus 0 ≪ K⁻ ≤ K ≤ K⁺ and the envelope equilibria."""
    env = model.envelopes if envelopes is None else envelopes
    Km, Kp, K = map(np.asarray, (env.K_minus, env.K_plus, model.K))
    if not (np.all(Km > 0) and np.all(Km <= K + ORDER_TOL) and np.all(K <= Kp + ORDER_TOL)):
        return Verdict(FAIL, 0, {"point": [Km.tolist(), K.tolist(), Kp.tolist()],
                                 "inequality": "0 << K- <= K <= K+",
                                 "margin": float(min(np.min(Km), np.min(K - Km), np.min(Kp - K)))})
    for label, fun, at in (("f-(0) = 0", env.f_minus, 0 * K), ("f+(0) = 0", env.f_plus, 0 * K),
                           ("f+(K+) = 0", env.f_plus, Kp), ("f-(K-) = 0", env.f_minus, Km)):
        r = float(np.max(np.abs(fun(at))))
        if r > 1e-10:
            return Verdict(FAIL, 0, {"point": at.tolist(), "inequality": label, "margin": -r})
    pts = _box_samples(Kp, samples, seed)
    f = model.reaction(pts)
    low = f - env.f_minus(pts)
    high = env.f_plus(pts) - f
    for label, gap in (("f- <= f", low), ("f <= f+", high)):
        i, n = np.unravel_index(int(np.argmin(gap)), gap.shape)
        if gap[i, n] < -ORDER_TOL:
            return Verdict(FAIL, samples, {"point": pts[:, n].tolist(),
                                           "inequality": f"{label} (component {i + 1})",
                                           "margin": float(gap[i, n])})
    return Verdict(PASS, samples, detail={"min_gap": float(min(low.min(), high.min()))})


def check_jacobian_match(model: ModelSpec, tol=1e-6):
    """f and f± share f'(0) (one-sided differences into the box)."""
    worst, bad = 0.0, None
    for label, fun in (("f", model.reaction), ("f-", model.envelopes.f_minus),
                       ("f+", model.envelopes.f_plus)):
        h = 1e-7
        J = np.empty((model.m, model.m))
        for j in range(model.m):
            e = np.zeros(model.m)
            e[j] = h
            J[:, j] = (fun(e) - fun(0 * e)) / h
        err = float(np.max(np.abs(J - model.jacobian0)))
        if err > worst:
            worst, bad = err, label
    if worst > tol * max(1.0, float(np.max(np.abs(model.jacobian0)))):
        return Verdict(FAIL, 3, {"point": [0.0] * model.m, "inequality": f"{bad}'(0) = f'(0)",
                                 "margin": -worst})
    return Verdict(PASS, 3, detail={"max_deviation": worst})


# ---------------------------------------------------------------------------
# (A0)


def check_equilibria(reaction, K, rays=1000, seed=0, name="equilibria"):
    """f(0) = 0 = f(K) exactly/within 1e-10, and a search for other equilibria in [0, K].

    The search samples rays s·p, p ∈ [0, K], picks on each the point where |f| is
    smallest relative to |u| and polishes it with a root solve. It is a heuristic: a
    clean result is reported as heuristic-pass and a found equilibrium is reported
    but not enforced.
    """
    K = np.asarray(K, float)
    z = reaction(np.zeros_like(K))
    if np.any(z != 0):
        return Verdict(FAIL, 1, {"point": [0.0] * K.size, "inequality": "f(0) = 0",
                                 "margin": -float(np.max(np.abs(z)))})
    r = float(np.max(np.abs(reaction(K))))
    if r > 1e-10:
        return Verdict(FAIL, 1, {"point": K.tolist(), "inequality": "f(K) = 0", "margin": -r})
    if np.any(K <= 0):
        return Verdict(FAIL, 1, {"point": K.tolist(), "inequality": "K >> 0",
                                 "margin": float(np.min(K))})
    dirs = _box_samples(K, rays, seed)  # (m, rays)
    s = np.linspace(0.02, 0.98, 49)
    pts = dirs[:, :, None] * s  # (m, rays, S)
    F = reaction(pts)
    score = np.max(np.abs(F), axis=0) / np.maximum(np.max(pts, axis=0), 1e-300)
    best = np.argmin(score, axis=1)
    scale = float(np.max(K))
    fun = lambda u: reaction(u)
    for n in range(rays):
        start = pts[:, n, best[n]]
        sol = root(fun, start, method="hybr")
        e = sol.x
        if not sol.success or np.max(np.abs(fun(e))) > 1e-10:
            continue
        inside = np.all(e >= -1e-9 * scale) and np.all(e <= K + 1e-9 * scale)
        far = min(np.max(np.abs(e)), np.max(np.abs(e - K))) > 1e-6 * scale
        if inside and far:
            return Verdict(FAIL, rays, {"point": e.tolist(),
                                        "inequality": "no equilibrium in [0,K] besides 0 and K",
                                        "margin": -float(np.max(np.abs(fun(e))))},
                           enforced=False)
    return Verdict(HEURISTIC, rays, detail={"rays": rays})


# ---------------------------------------------------------------------------
# (A1)


def check_A1(model: ModelSpec, spectral: SpectralData | None = None):
    try:
        sp = compute_cstar(model) if spectral is None else spectral
        grid = np.concatenate([[0.0], [p[0] for p in sp.scan],
                               np.linspace(0.0, 2.0, 41) * sp.lambda_star])
        for lam in grid:
            M, v = principal_eigenpair(assemble_A(model, float(lam)))
            if np.any(v <= 0):
                return Verdict(FAIL, grid.size, {"point": [float(lam)],
                                                 "inequality": "v(lambda) >> 0",
                                                 "margin": float(np.min(v))})
    except ArtifactError as exc:
        return Verdict(FAIL, 1, {"point": [], "inequality": str(exc), "margin": float("nan")})
    status = PASS if sp.structure == "irreducible-cooperative" else HEURISTIC
    return Verdict(status, grid.size, detail={"structure": sp.structure,
                                              "s(f'(0))": sp.growth_rate, "c_star": sp.c_star,
                                              "lambda_star": sp.lambda_star,
                                              "unimodal": sp.unimodal})


# ---------------------------------------------------------------------------
# Jacobian bound f'(u) ≤ f'(0)


def jacobian_bound_violation(model: ModelSpec, samples=4096, seed=0):
    """Largest entry of f'(u) - f'(0) over sampled u in [0, K], with the point."""
    pts = _box_samples(model.K, samples, seed)
    J = fd_jacobian(model.reaction, pts)
    excess = J - model.jacobian0[:, :, None]
    k = np.unravel_index(int(np.argmax(excess)), excess.shape)
    return float(excess[k]), pts[:, k[2]]


def check_jacobian_bound(model: ModelSpec, samples=4096, seed=0, tol=1e-6):
    worst, at = jacobian_bound_violation(model, samples, seed)
    if worst > tol:
        return Verdict(FAIL, samples, {"point": at.tolist(), "inequality": "f'(u) <= f'(0)",
                                       "margin": -worst}, enforced=False)
    return Verdict(PASS, samples, detail={"max_excess": worst}, enforced=False)


# ---------------------------------------------------------------------------
# epidemic (H1)/(H2)


def _g(model):
    p = model.params
    if p["g_kind"] == "g1":
        return lambda u: p["omega"] * u / (1.0 + p["nu"] * u)
    return lambda u: p["omega"] * u / (1.0 + p["nu"] * u * u)


def check_H1_H2(model: ModelSpec, samples=10_000):
    if model.kind != "epidemic":
        raise ValueError("(H1)/(H2) apply to the epidemic model only")
    p = model.params
    g = _g(model)
    beta, gamma = p["beta"], p["gamma"]
    k, u_max = model.info["k"], model.info["u_max"]
    g0 = p["omega"]
    u = np.linspace(0.0, k, samples + 2)[1:-1]
    rep = AssumptionReport()

    # (H1): g(k) = βk/γ, g > βu/γ on (0, k), g ≤ g'(0)u on [0, k]
    h1 = None
    r = abs(g(k) - beta * k / gamma)
    if r > 1e-10:
        h1 = Verdict(FAIL, 1, {"point": [k], "inequality": "g(k) = beta k / gamma", "margin": -r})
    gap = g(u) - beta / gamma * u
    if h1 is None and gap.min() <= 0:
        n = int(np.argmin(gap))
        h1 = Verdict(FAIL, samples, {"point": [float(u[n])],
                                     "inequality": "g(u) > beta u / gamma", "margin": float(gap[n])})
    lin = g0 * u - g(u)
    if h1 is None and lin.min() < -1e-12:
        n = int(np.argmin(lin))
        h1 = Verdict(FAIL, samples, {"point": [float(u[n])], "inequality": "g(u) <= g'(0) u",
                                     "margin": float(lin[n])})
    rep.add("H1", h1 or Verdict(PASS, samples, detail={"k": k}))

    # (H2): (a) increasing everywhere, or (b) increasing up to u_max then decreasing
    top = 4.0 * max(k, u_max if math.isfinite(u_max) else k) + 1.0
    w = np.linspace(0.0, top, samples)
    dg = np.diff(g(w))
    if math.isinf(u_max):
        bad = np.flatnonzero(dg <= 0)
        variant = "a"
        ok = bad.size == 0
    else:
        mid = (w[:-1] + w[1:]) / 2
        bad = np.flatnonzero(((mid < u_max) & (dg <= 0)) | ((mid > u_max) & (dg >= 0)))
        variant = "b"
        ok = bad.size == 0
    if ok:
        rep.add("H2", Verdict(HEURISTIC, samples, detail={"variant": variant, "u_max": u_max}))
    else:
        rep.add("H2", Verdict(FAIL, samples, {"point": [float(w[bad[0]])],
                                              "inequality": f"(H2)({variant}) monotonicity",
                                              "margin": float(dg[bad[0]])}))
    rep.add("k<=u_max", Verdict(PASS, 0, detail={"k": k, "u_max": u_max,
                                                 "cooperative_regime": bool(k <= u_max)},
                                enforced=False))
    return rep


# ---------------------------------------------------------------------------
# sufficient inequalities of the application models


def _z_samples(spectral, samples, seed, k_max=4):
    lam_top = max(spectral.lambda_star, spectral.growth_rate)
    _, vtab = _v_table(spectral, lam_top)
    out = []
    for k in range(1, k_max + 1):
        u = _halton(2 * k, samples, seed + 100 + k)
        rho = 1e3 * 10.0 ** (-8.0 * u[:, :k])
        idx = np.minimum((u[:, k:] * LAMBDA_GRID).astype(int), LAMBDA_GRID - 1)
        out.append(np.einsum("nj,njm->nm", rho, vtab[idx]))
    return np.concatenate(out)


def _first_violation(name, z, margin):
    n = int(np.argmin(margin))
    if margin[n] < -1e-12 * max(1.0, float(np.max(np.abs(z[n])))):
        return Verdict(FAIL, z.shape[0], {"point": z[n].tolist(), "inequality": name,
                                          "margin": float(margin[n])})
    return None


def check_buffered(model: ModelSpec, spectral: SpectralData, samples=2500, seed=0):
    p = model.params
    rep = AssumptionReport()
    for label, ok, margin in (("d1 >= d2", p["d1"] >= p["d2"], p["d1"] - p["d2"]),
                              ("1 > k2 b", 1 > p["k2"] * p["b"], 1 - p["k2"] * p["b"]),
                              ("k1 >= k2", p["k1"] >= p["k2"], p["k1"] - p["k2"])):
        rep.add(f"param:{label}", Verdict(PASS, 0) if ok else
                Verdict(FAIL, 0, {"point": list(p.values()), "inequality": label,
                                  "margin": margin}))
    z = _z_samples(spectral, samples, seed)
    v = _first_violation("z1 >= k2 z2", z, z[:, 0] - p["k2"] * z[:, 1])
    rep.add("reduced:z1>=k2z2", v or Verdict(HEURISTIC, z.shape[0]))
    return rep


def check_population(model: ModelSpec, spectral: SpectralData, samples=2500, seed=0):
    p = model.params
    r1, r2, alpha, delta = p["r1"], p["r2"], p["alpha"], p["delta"]
    rep = AssumptionReport()
    bound = r1 * r2 / (r1 + r2 - alpha)
    for label, margin in (("r1 > alpha", r1 - alpha), ("d1 >= d2", p["d1"] - p["d2"]),
                          ("delta >= r1 r2/(r1+r2-alpha)", delta - bound)):
        strict = label == "r1 > alpha"
        ok = margin > 0 if strict else margin >= 0
        rep.add(f"param:{label}", Verdict(PASS, 0) if ok else
                Verdict(FAIL, 0, {"point": [r1, r2, alpha, delta], "inequality": label,
                                  "margin": margin}))
    z = _z_samples(spectral, samples, seed)
    z1, z2 = z[:, 0], z[:, 1]
    checks = [("delta z1 >= r1 z2", delta * z1 - r1 * z2),
              ("e^z1 (z1 + z2^2) >= z1 (1 + z2)",
               (z1 + z2 ** 2) - z1 * (1 + z2) * np.exp(-z1))]
    if not model.cooperative:
        big = z1 > 1
        checks.append(("e (z1 + z2^2) >= 1 + z2 for z1 > 1",
                       np.where(big, math.e * (z1 + z2 ** 2) - (1 + z2), np.inf)))
    for label, margin in checks:
        rep.add(f"reduced:{label}", _first_violation(label, z, margin)
                or Verdict(HEURISTIC, z.shape[0]))
    return rep


# ---------------------------------------------------------------------------


def check_all(model: ModelSpec, spectral: SpectralData | None = None, seed=0,
              samples=10_000, k_max=4, rays=1000):
    """Run every applicable check for ``model``."""
    rep = AssumptionReport()
    rep.add("A0", check_equilibria(model.reaction, model.K, rays, seed))
    a1 = check_A1(model, spectral)
    rep.add("A1", a1)
    if a1.status == FAIL:
        return rep
    sp = compute_cstar(model) if spectral is None else spectral
    if model.envelopes is None:
        rep.add("A2", check_cooperative(model.reaction, model.K, samples // 2, seed))
        rep.add("A3", check_subhomog(model.reaction, sp, model.K, k_max, samples, seed))
        rep.add("A3*", check_subhomog(model.reaction, sp, model.K, k_max, samples, seed,
                                      capped=False))
        rep.entries["A3*"].enforced = False
    else:
        env = model.envelopes
        rep.add("A2'", check_envelope_order(model, env, samples, seed))
        rep.add("A2(non-coop)", check_cooperative(model.reaction, model.K, samples // 2, seed))
        rep.entries["A2(non-coop)"].enforced = False
        rep.add("A3':jacobian", check_jacobian_match(model))
        rep.add("A3':equilibria-", check_equilibria(env.f_minus, env.K_minus, rays, seed))
        rep.add("A3':equilibria+", check_equilibria(env.f_plus, env.K_plus, rays, seed))
        rep.add("A4'-", check_cooperative(env.f_minus, env.K_plus, samples // 2, seed))
        rep.add("A4'+", check_cooperative(env.f_plus, env.K_plus, samples // 2, seed))
        rep.add("A5'", check_subhomog(env.f_plus, sp, env.K_plus, k_max, samples, seed))
    rep.add("f'(u)<=f'(0)", check_jacobian_bound(model, seed=seed))
    if model.kind == "epidemic":
        rep.merge(check_H1_H2(model))
    elif model.kind == "buffered":
        rep.merge(check_buffered(model, sp, seed=seed))
    elif model.kind == "population":
        rep.merge(check_population(model, sp, seed=seed))
    return rep
