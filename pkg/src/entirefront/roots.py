"""Scalar root finding and minimization used throughout the package."""

import math

from .errors import ConvergenceError, ScanError

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def bisect(f, a, b, tol=1e-12, max_iter=400):
    """Root of ``f`` on ``[a, b]`` by bisection. ``f(a)`` and ``f(b)`` must differ in sign."""
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0) == (fb > 0):
        raise ScanError(f"no sign change on [{a}, {b}]", fa=fa, fb=fb)
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        if b - a <= tol * max(1.0, abs(mid)) or mid in (a, b):
            return mid
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def doubling_bracket(f, start=1e-8, limit=1e8):
    """Scan ``start, 2*start, 4*start, ...`` until ``f`` changes sign.

    Returns ``(lo, hi)`` with the sign change inside.
    """
    lo, flo = start, f(start)
    hi = start
    while hi < limit:
        hi = 2.0 * lo
        fhi = f(hi)
        if (fhi > 0) != (flo > 0) or fhi == 0.0:
            return lo, hi
        lo, flo = hi, fhi
    raise ScanError(f"no sign change found below {limit}")


def bracketed_root(f, start=1e-8, tol=1e-15):
    lo, hi = doubling_bracket(f, start)
    return bisect(f, lo, hi, tol)


def golden_section(f, a, b, tol=1e-10, max_iter=500):
    """Minimize a unimodal ``f`` on ``[a, b]``; returns ``(x, a, b)`` with the final bracket."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    else:
        raise ConvergenceError("golden section did not reach tolerance")
    x = c if fc < fd else d
    return x, a, b
