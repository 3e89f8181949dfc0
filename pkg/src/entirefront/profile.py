"""Uniformly sampled monotone profiles with an analytic exponential left tail."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

TINY = 1e-300


@dataclass(frozen=True, eq=False)
class Profile:
    """Samples ``values[j] ≈ P(t0 + j*dt)`` of a vector profile ``P``.

    Beyond the left end the profile is ``amplitude * exp(rate * t)`` (``decay_meta``);
    beyond the right end it is the constant ``right_limit``.
    """

    t0: float
    dt: float
    values: np.ndarray
    decay_meta: tuple
    right_limit: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def m(self):
        return self.values.shape[1]

    @property
    def grid(self):
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def t1(self):
        return self.t0 + self.dt * (self.n - 1)

    def __call__(self, t):
        """Evaluate at scalar or array ``t``; returns shape ``t.shape + (m,)``.

        Interpolation is linear in log-space so that exponential tails are exact.
        """
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        rate, amp = self.decay_meta
        out = np.empty((flat.size, self.m))
        grid = self.grid
        logv = np.log(np.maximum(self.values, TINY))
        left = flat < self.t0
        right = flat > self.t1
        mid = ~(left | right)
        for i in range(self.m):
            out[mid, i] = np.exp(np.interp(flat[mid], grid, logv[:, i]))
            out[left, i] = amp[i] * np.exp(rate * flat[left])
            out[right, i] = self.right_limit[i]
        return out.reshape(t.shape + (self.m,))

    def with_values(self, values, **kw):
        return replace(self, values=values, **kw)


def as_columns(u):
    """(n, m) state array to the (m, n) layout reactions expect."""
    return np.ascontiguousarray(u.T)
