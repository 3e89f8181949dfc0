"""Principal eigenpairs of A(λ) = Dλ² + f'(0), the critical speed c* and decay rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (AssumptionError, ConvergenceError, DomainError, DominanceError,
                     MonostabilityError, ScanError, SpeedError)
from .model import ModelSpec
from .roots import bisect, golden_section

IRREDUCIBLE = "irreducible-cooperative"
BLOCK = "block-lower-triangular"

POWER_TOL = 1e-13
POWER_MAX_ITER = 100_000
LAMBDA_MIN = 1e-6
LAMBDA_MAX = 1e3


def assemble_A(model: ModelSpec, lam: float) -> np.ndarray:
    if lam < 0:
        raise DomainError(f"lambda must be nonnegative, got {lam}")
    return np.diag(model.diffusion * lam * lam) + model.jacobian0


def perron(B: np.ndarray, x0=None, tol=POWER_TOL, max_iter=POWER_MAX_ITER):
    """Perron root and vector of a nonnegative irreducible matrix with positive diagonal.

    Stops when the Collatz-Wielandt bounds ``min(Bx/x) <= rho <= max(Bx/x)`` agree to
    ``tol`` relative, which also bounds the eigenvalue error.
    """
    n = B.shape[0]
    x = np.ones(n) if x0 is None else np.array(x0, dtype=float)
    x /= x.max()
    for _ in range(max_iter):
        y = B @ x
        ratio = y / x
        lo, hi = ratio.min(), ratio.max()
        x = y / y.max()
        if hi - lo <= tol * max(1.0, abs(hi)):
            return 0.5 * (lo + hi), x
    raise ConvergenceError("power iteration did not converge", gap=float(hi - lo))


def _irreducible_pair(A, x0=None):
    shift = 1.0 + max(0.0, -float(np.min(np.diag(A))))
    rho, v = perron(A + shift * np.eye(A.shape[0]), x0)
    return rho - shift, v


def _check_cooperative(A):
    off = A - np.diag(np.diag(A))
    if np.any(off < 0):
        i, j = np.argwhere(off < 0)[0]
        raise AssumptionError(f"A has a negative off-diagonal entry at ({i}, {j})",
                              value=float(A[i, j]))


def block_structure(A):
    """Strongly connected blocks of the influence graph ``j -> i`` when ``A[i, j] > 0``.

    Returns ``(labels, order)`` where ``order`` lists block ids topologically.
    """
    n = A.shape[0]
    adj = (A > 0) & ~np.eye(n, dtype=bool)
    nb, labels = connected_components(adj.T.astype(float), directed=True, connection="strong")
    edges = set()
    for i, j in zip(*np.nonzero(adj)):
        if labels[i] != labels[j]:
            edges.add((labels[j], labels[i]))
    indeg = [0] * nb
    for _, b in edges:
        indeg[b] += 1
    ready = [b for b in range(nb) if indeg[b] == 0]
    order = []
    while ready:
        b = ready.pop(0)
        order.append(b)
        for s, t in sorted(edges):
            if s == b:
                indeg[t] -= 1
                if indeg[t] == 0:
                    ready.append(t)
    return labels, order, edges


def principal_eigenpair(A, structure=None, x0=None):
    """Principal eigenvalue ``M`` and eigenvector ``v >> 0`` (max-norm 1) of a cooperative matrix."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m = A.shape[0]
    if m == 1:
        return float(A[0, 0]), np.ones(1)
    _check_cooperative(A)
    labels, order, edges = block_structure(A)
    if len(order) == 1:
        if structure == BLOCK:
            raise DominanceError("matrix is irreducible but block structure was requested")
        M, v = _irreducible_pair(A, x0)
    else:
        if structure == IRREDUCIBLE:
            raise AssumptionError("matrix is reducible; irreducible structure was requested")
        M, v = _reducible_pair(A, labels, order, edges)
    if m <= 3:
        roots = np.roots(np.poly(A))
        ref = float(np.max(roots.real))
        if abs(ref - M) > 1e-6 * max(1.0, abs(M)):
            raise ConvergenceError("power iteration disagrees with characteristic polynomial",
                                   power=M, poly=ref)
    return M, v


def _reducible_pair(A, labels, order, edges):
    blocks = {b: np.flatnonzero(labels == b) for b in order}
    eig = {}
    for b, idx in blocks.items():
        sub = A[np.ix_(idx, idx)]
        eig[b] = _irreducible_pair(sub) if idx.size > 1 else (float(sub[0, 0]), np.ones(1))
    top = max(order, key=lambda b: eig[b][0])
    M = eig[top][0]
    others = [eig[b][0] for b in order if b != top]
    if others and max(others) >= M:
        raise DominanceError("principal eigenvalue of the leading block is not strictly dominant",
                             M=M, competitor=max(others))
    reach, frontier = {top}, [top]
    while frontier:
        s = frontier.pop()
        for a, b in edges:
            if a == s and b not in reach:
                reach.add(b)
                frontier.append(b)
    if len(reach) != len(order):
        raise DominanceError("dominant block does not feed every other block; eigenvector not positive")
    v = np.zeros(A.shape[0])
    v[blocks[top]] = eig[top][1]
    for b in order[order.index(top) + 1:]:
        idx = blocks[b]
        rhs = A[idx] @ v
        v[idx] = np.linalg.solve(M * np.eye(idx.size) - A[np.ix_(idx, idx)], rhs)
    if np.any(v <= 0):
        raise DominanceError("back-substituted eigenvector is not positive")
    return M, v / v.max()


def _dominant_block(A):
    labels, order, _ = block_structure(A)
    if len(order) == 1:
        return np.arange(A.shape[0])
    best, best_val = None, -math.inf
    for b in order:
        idx = np.flatnonzero(labels == b)
        val = principal_eigenpair(A[np.ix_(idx, idx)])[0] if idx.size > 1 else A[idx[0], idx[0]]
        if val > best_val:
            best, best_val = idx, val
    return best


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Spectral summary of a model.

    ``lambda_star`` is the minimizer of M(λ)/λ; ``growth_rate`` is M(0) = s(f'(0)), the
    exponent of the spatially independent solution.
    """

    model: ModelSpec
    lambda_star: float
    c_star: float
    v_star: np.ndarray
    growth_rate: float
    structure: str
    scan: list = field(default_factory=list)
    unimodal: bool = True

    def M(self, lam):
        return _eig_cached(self.model, float(lam))[0]

    def v(self, lam):
        return _eig_cached(self.model, float(lam))[1].copy()

    def dM(self, lam):
        return eigen_derivative(self.model, float(lam))

    def lambda1(self, c):
        return compute_lambda1(self, c)


_CACHE = {}


def _eig_cached(model, lam):
    key = (id(model), lam)
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is model:
        return hit[1]
    A = assemble_A(model, lam)
    M, v = principal_eigenpair(A)
    resid = np.max(np.abs(A @ v - M * v))
    if resid > 1e-10 * max(1.0, np.max(np.abs(A))):
        raise ConvergenceError("eigen-residual too large", lam=lam, residual=float(resid))
    if len(_CACHE) > 20000:
        _CACHE.clear()
    _CACHE[key] = (model, (M, v))
    return M, v


def eigen_derivative(model, lam):
    """dM/dλ = 2λ wᵀDv / wᵀv on the dominant block (w, v left/right Perron vectors)."""
    A = assemble_A(model, lam)
    idx = _dominant_block(A)
    sub = A[np.ix_(idx, idx)]
    if idx.size == 1:
        return 2.0 * lam * model.diffusion[idx[0]]
    _, v = _irreducible_pair(sub)
    _, w = _irreducible_pair(sub.T)
    d = model.diffusion[idx]
    return 2.0 * lam * float(w @ (d * v)) / float(w @ v)


def compute_cstar(model: ModelSpec, lambda_max=LAMBDA_MAX, tol=1e-10) -> SpectralData:
    A0 = assemble_A(model, 0.0)
    M0, v0 = principal_eigenpair(A0)
    if M0 <= 0:
        raise MonostabilityError(f"s(f'(0)) = {M0:.6g} is not positive")
    structure = IRREDUCIBLE if len(block_structure(A0)[1]) == 1 else BLOCK
    q = lambda lam: _eig_cached(model, lam)[0] / lam

    probes = []
    lam, rises = LAMBDA_MIN, 0
    while lam <= lambda_max:
        val = q(lam)
        if probes and val > probes[-1][1]:
            rises += 1
        else:
            rises = 0
        probes.append((lam, val))
        if rises >= 3:
            break
        lam *= 2.0
    else:
        raise ScanError("no interior minimum of M(λ)/λ found", trace=probes)
    vals = [p[1] for p in probes]
    i = int(np.argmin(vals))
    if i == 0 or i == len(probes) - 1:
        raise ScanError("minimum of M(λ)/λ sits on the scan boundary", trace=probes)
    a, b = probes[i - 1][0], probes[i + 1][0]
    lam_star, ga, gb = golden_section(q, a, b, tol=tol)
    lam_star = _polish(model, lam_star, ga, gb)
    c_star = q(lam_star)

    # interior-minimum report on a uniform grid around the minimizer
    grid = np.linspace(0.05, 2.0, 40) * lam_star
    qs = np.array([q(x) for x in grid])
    d = np.sign(np.diff(qs))
    unimodal = bool(np.all(np.diff(d[d != 0]) >= 0))
    for x in np.concatenate(([0.0], grid)):
        _eig_cached(model, float(x))  # dominance and positivity are checked on evaluation
    return SpectralData(model=model, lambda_star=lam_star, c_star=c_star, v_star=v0,
                        growth_rate=M0, structure=structure, scan=probes, unimodal=unimodal)


def _polish(model, lam, a, b):
    """Refine the minimizer by a root of λM'(λ) - M(λ), the stationarity condition of M/λ."""
    phi = lambda x: x * eigen_derivative(model, x) - _eig_cached(model, x)[0]
    width = max(b - a, 1e-8 * lam)
    lo, hi = max(lam - 10 * width, LAMBDA_MIN), lam + 10 * width
    try:
        if phi(lo) < 0 < phi(hi):
            return bisect(phi, lo, hi, tol=1e-15)
    except ScanError:
        pass
    return lam


def compute_lambda1(spectral: SpectralData, c: float) -> float:
    """Smaller root of M(λ) = cλ on (0, λ_*)."""
    if not c > spectral.c_star:
        raise SpeedError(f"speed {c} is not above c* = {spectral.c_star}")
    g = lambda lam: spectral.M(lam) - c * lam
    return bisect(g, 0.0, spectral.lambda_star, tol=1e-15)
