"""Pure numpy reference kernels (fallback when the extension is unavailable)."""

from __future__ import annotations

import numpy as np


def walk_products(branches: np.ndarray, outcomes: np.ndarray, v0: np.ndarray) -> np.ndarray:
    """Return ``U[o[t, n-1]] ... U[o[t, 0]] @ v0[t]`` for every trial ``t``."""
    branches = np.ascontiguousarray(branches, dtype=np.complex128)
    outcomes = np.asarray(outcomes, dtype=np.intp)
    v = np.array(v0, dtype=np.complex128, copy=True)
    if v.shape != (outcomes.shape[0],) + branches.shape[1:]:
        raise ValueError("v0 must have shape (trials, d, d)")
    if outcomes.size and (outcomes.min() < 0 or outcomes.max() >= branches.shape[0]):
        raise IndexError("outcome index out of range")
    for s in range(outcomes.shape[1]):
        v = branches[outcomes[:, s]] @ v
    return v


def linear_step(u, a, b, scale, z) -> None:
    """In place: ``u[t] <- (I + scale[t] * a + sum_j z[t, j] * b[j]) @ u[t]``."""
    d = u.shape[1]
    k = np.eye(d, dtype=np.complex128) + scale[:, None, None] * a
    if b.shape[0]:
        k = k + np.einsum("tj,jab->tab", z, b)
    u[...] = k @ u
