"""Numerical extraction of the limit tensors ``M^{ij}_0`` and ``M^{ij}_k``.

``M^{ij}_0 = lim S^{ij}_0(h)`` and ``M^{ij}_k = lim sqrt(h) S^{ij}_k(h)`` for
``i, j, k >= 1``.  The sequences are extrapolated to ``h = 0`` with Neville's
scheme in the variable ``s = sqrt(h)``, since the preset families expand in
half-integer powers of ``h``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .family import HFamily

#: geometric probe sequence with ratio 1/4
DEFAULT_HS = (0.1, 0.025, 0.00625, 0.0015625)
#: extrapolation corrections smaller than this never flag an entry
FLAG_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class LimitTensors:
    """``m0[i, j] = M^{i+1, j+1}_0`` and ``mk[i, j, k] = M^{i+1, j+1}_{k+1}`` (0-based storage)."""

    m0: np.ndarray
    mk: np.ndarray
    probe_hs: np.ndarray
    error_m0: np.ndarray
    error_mk: np.ndarray
    flagged_m0: np.ndarray
    flagged_mk: np.ndarray

    @property
    def n(self) -> int:
        return self.m0.shape[0]

    @property
    def max_error(self) -> float:
        return float(max(self.error_m0.max(), self.error_mk.max()))

    @property
    def any_flagged(self) -> bool:
        return bool(self.flagged_m0.any() or self.flagged_mk.any())

    @classmethod
    def exact(cls, m0, mk) -> "LimitTensors":
        m0 = np.asarray(m0, dtype=complex)
        mk = np.asarray(mk, dtype=complex)
        return cls(m0, mk, np.array([]), np.zeros(m0.shape), np.zeros(mk.shape),
                   np.zeros(m0.shape, bool), np.zeros(mk.shape, bool))


def neville(xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Polynomial extrapolation of ``ys`` (axis 0) to ``x = 0``.

    Returns the estimate, the size of the last correction as an error
    estimate, and a flag for entries whose successive corrections grow.
    """
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    table = [np.asarray(y, dtype=complex) for y in ys]
    diag = [table[-1]]
    for level in range(1, n):
        table = [
            (xs[i + level] * table[i] - xs[i] * table[i + 1]) / (xs[i + level] - xs[i])
            for i in range(n - level)
        ]
        diag.append(table[-1])
    corrections = [np.abs(diag[k] - diag[k - 1]) for k in range(1, n)]
    error = corrections[-1] if corrections else np.zeros_like(np.abs(diag[0]))
    flagged = np.zeros(error.shape, dtype=bool)
    for k in range(1, len(corrections)):
        flagged |= (corrections[k] > corrections[k - 1]) & (corrections[k] > FLAG_FLOOR)
    return diag[-1], error, flagged


def tensor_sequences(fam: HFamily, hs) -> tuple[np.ndarray, np.ndarray]:
    """``S^{ij}_0(h)`` and ``sqrt(h) S^{ij}_k(h)`` for each ``h``, indices ``i, j, k >= 1``."""
    s0, sk = [], []
    for h in hs:
        s = fam(h).tensor.coeffs
        s0.append(s[1:, 1:, 0])
        sk.append(np.sqrt(h) * s[1:, 1:, 1:])
    return np.array(s0), np.array(sk)


def estimate_limit_tensors(fam: HFamily, probe_hs=DEFAULT_HS) -> LimitTensors:
    hs = np.asarray(probe_hs, dtype=float)
    if hs.size < 3:
        raise ValueError("need at least 3 probe step sizes")
    if np.any(hs <= 0) or np.any(np.diff(hs) >= 0):
        raise ValueError("probe step sizes must be positive and strictly decreasing")
    s0, sk = tensor_sequences(fam, hs)
    x = np.sqrt(hs)
    m0, e0, f0 = neville(x, s0)
    mk, ek, fk = neville(x, sk)
    return LimitTensors(m0, mk, hs, e0, ek, f0, fk)
