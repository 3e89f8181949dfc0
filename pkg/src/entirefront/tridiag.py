"""Factor-once tridiagonal systems (LAPACK gttrf/gttrs)."""

import numpy as np
from scipy.linalg import lapack

from .errors import NumericalError


class Tridiagonal:
    """``lower[i] = A[i+1, i]``, ``diag[i] = A[i, i]``, ``upper[i] = A[i, i+1]``."""

    def __init__(self, lower, diag, upper):
        self._factors = lapack.dgttrf(np.asarray(lower, float), np.asarray(diag, float),
                                      np.asarray(upper, float))
        if self._factors[-1] != 0:
            raise NumericalError("singular tridiagonal matrix", info=int(self._factors[-1]))
        self.n = len(diag)

    def solve(self, rhs):
        """Solve for one right-hand side ``(n,)`` or many ``(n, k)``."""
        dl, d, du, du2, ipiv, _ = self._factors
        x, info = lapack.dgttrs(dl, d, du, du2, ipiv, rhs)
        if info != 0:
            raise NumericalError("tridiagonal solve failed", info=int(info))
        return x


def implicit_operator(n, diff, adv, dt):
    """Matrix of ``I - dt*(diff*δ² - adv*δ⁰)`` on a uniform grid, with identity boundary rows.

    ``diff`` and ``adv`` are already divided by ``dx²`` and ``2dx`` respectively.
    """
    r, a = dt * diff, dt * adv
    diag = np.full(n, 1.0 + 2.0 * r)
    upper = np.full(n - 1, -(r - a))
    lower = np.full(n - 1, -(r + a))
    diag[0] = diag[-1] = 1.0
    upper[0] = 0.0
    lower[-1] = 0.0
    return Tridiagonal(lower, diag, upper)
