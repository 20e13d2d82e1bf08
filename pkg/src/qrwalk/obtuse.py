"""Complex obtuse systems and obtuse random variables.

An obtuse system in C^N is a family of N+1 vectors whose pairwise inner
products all equal -1.  It carries the probability law ``p_i = 1/(1+|v_i|^2)``
and the random variable ``X`` taking value ``v_i`` with probability ``p_i``
is centred with identity covariance.

Outcome indices are 0-based in this library; the CLI prints them 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .numerics import CDTYPE, STRUCT_TOL, is_unitary, random_unitary


class ObtuseError(ValueError):
    """A family of vectors fails the obtuse-system conditions."""


@dataclass(frozen=True, eq=False)
class ObtuseSystem:
    """``vectors[i]`` is ``v_i``; shape ``(N+1, N)``."""

    vectors: np.ndarray
    probabilities: np.ndarray

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.vectors.shape[0]

    def extended_values(self) -> np.ndarray:
        """Values of ``(X^0, X^1, ..., X^N)`` per outcome, ``X^0 = 1``; shape ``(N+1, N+1)``."""
        return np.hstack([np.ones((self.n_outcomes, 1), dtype=CDTYPE), self.vectors])

    def apply_unitary(self, r: np.ndarray) -> "ObtuseSystem":
        """The system ``{R v_i}``, which shares the same probabilities."""
        r = np.asarray(r, dtype=CDTYPE)
        return ObtuseSystem(self.vectors @ r.T, self.probabilities.copy())


@dataclass(frozen=True, eq=False)
class ObtuseRV:
    """The random variable ``X(i) = v_i`` with ``P({i}) = p_i`` on ``{0, ..., N}``."""

    system: ObtuseSystem

    @property
    def dim(self) -> int:
        return self.system.dim

    @property
    def probabilities(self) -> np.ndarray:
        return self.system.probabilities

    @property
    def values(self) -> np.ndarray:
        return self.system.vectors

    def expect(self, f_values: np.ndarray) -> np.ndarray:
        """Exact expectation of a function given by its values per outcome (axis 0)."""
        return np.tensordot(self.probabilities, f_values, axes=(0, 0))

    def mean(self) -> np.ndarray:
        return self.expect(self.values)

    def covariance(self) -> np.ndarray:
        """``E[conj(X^i) X^j]``."""
        v = self.values
        return self.expect(np.conj(v)[:, :, None] * v[:, None, :])


def _check_identities(vectors: np.ndarray, p: np.ndarray, tol: float) -> None:
    n = vectors.shape[1]
    if abs(p.sum() - 1.0) > tol:
        raise ObtuseError(f"probabilities sum to {p.sum()!r}, not 1")
    centre = p @ vectors
    if np.linalg.norm(centre) > tol:
        raise ObtuseError(f"sum p_i v_i = {centre} is not zero")
    second = np.einsum("m,mi,mj->ij", p, vectors, np.conj(vectors))
    if np.linalg.norm(second - np.eye(n)) > tol:
        raise ObtuseError("sum p_i |v_i><v_i| differs from the identity")


def validate_obtuse(vectors, tol: float = STRUCT_TOL) -> ObtuseSystem:
    """Check the obtuse conditions and attach the canonical probabilities.

    Raises
    ------
    ObtuseError
        On a wrong number or dimension of vectors, on a pair ``(i, j)`` with
        ``<v_i, v_j> != -1`` beyond ``tol``, or if any of the three moment
        identities fails.
    """
    v = np.asarray(vectors, dtype=CDTYPE)
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2 or v.shape[1] < 1:
        raise ObtuseError(f"expected a list of vectors, got shape {v.shape}")
    n = v.shape[1]
    if v.shape[0] != n + 1:
        raise ObtuseError(f"an obtuse system in C^{n} has {n + 1} vectors, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ObtuseError("vectors have non-finite entries")
    gram = np.conj(v) @ v.T
    for i in range(n + 1):
        for j in range(i + 1, n + 1):
            if abs(gram[i, j] + 1.0) > tol:
                raise ObtuseError(
                    f"<v_{i + 1}, v_{j + 1}> = {gram[i, j]:.6g}, expected -1 (outcomes numbered from 1)"
                )
    p = 1.0 / (1.0 + np.real(np.diag(gram)))
    _check_identities(v, p, tol)
    return ObtuseSystem(v, p)


def obtuse_from_probabilities(p, tol: float = 1e-12) -> ObtuseSystem:
    """Canonical obtuse system with the prescribed law.

    Builds an orthonormal basis of C^{N+1} whose first row is ``sqrt(p)`` by
    Gram-Schmidt against the canonical basis (in index order), reads off
    ``v_i`` from column ``i`` and fixes the sign of every coordinate so that
    its first non-negligible entry is positive.  The result is real.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ObtuseError("need at least two probabilities")
    if np.any(~np.isfinite(p)) or np.any(p <= 0):
        raise ObtuseError("all probabilities must be strictly positive")
    if abs(p.sum() - 1.0) > tol:
        raise ObtuseError(f"probabilities sum to {p.sum()!r}, not 1")
    m = p.size
    rows = [np.sqrt(p)]
    for k in range(m):
        if len(rows) == m:
            break
        w = np.zeros(m)
        w[k] = 1.0
        for _ in range(2):  # re-orthogonalise once for stability
            for r in rows:
                w = w - (r @ w) * r
        norm = np.linalg.norm(w)
        if norm > 1e-8:
            rows.append(w / norm)
    basis = np.array(rows[1:])  # shape (N, N+1)
    vectors = (basis / np.sqrt(p)).T  # v_i = column i / sqrt(p_i)
    for k in range(vectors.shape[1]):
        col = vectors[:, k]
        first = np.flatnonzero(np.abs(col) > 1e-12)
        if first.size and col[first[0]] < 0:
            vectors[:, k] = -col
    system = validate_obtuse(vectors.astype(CDTYPE))
    return ObtuseSystem(system.vectors, p.copy())


def sample(rv: ObtuseRV | ObtuseSystem, rng_seed: int, count: int, trial: int = 0) -> np.ndarray:
    """i.i.d. outcome indices (0-based) drawn from the stream ``(rng_seed, trial)``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    probs = rv.probabilities
    return sample_indices(probs, _rng.stream(rng_seed, trial, "outcomes"), count)


def sample_indices(probs: np.ndarray, gen: np.random.Generator, count: int) -> np.ndarray:
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, gen.random(count), side="right")
    return np.minimum(idx, len(probs) - 1)


def unitary_equivalence(a: ObtuseSystem, b: ObtuseSystem, tol: float = STRUCT_TOL) -> np.ndarray | None:
    """The unitary ``U`` of C^N with ``U a_i = b_i`` for all ``i``, or ``None``.

    Outcome indices must already be aligned; no re-indexing is attempted.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if np.max(np.abs(a.probabilities - b.probabilities)) > tol:
        return None
    # U a_i = b_i for all i  <=>  A^T U^T = B^T (least squares, N+1 equations)
    sol, *_ = np.linalg.lstsq(a.vectors, b.vectors, rcond=None)
    u = sol.T
    if np.linalg.norm(a.vectors @ u.T - b.vectors) > tol * max(1.0, np.abs(b.vectors).max()):
        return None
    if not is_unitary(u, tol):
        return None
    return u


def random_obtuse(dim: int, gen: np.random.Generator, alpha: float = 1.0) -> ObtuseSystem:
    """Random law from a Dirichlet(alpha) draw, rotated by a Haar unitary."""
    p = gen.dirichlet(np.full(dim + 1, alpha))
    p = np.maximum(p, 1e-6)
    p = p / p.sum()
    return obtuse_from_probabilities(p).apply_unitary(random_unitary(dim, gen))


def covariance_identity_residual(rv: ObtuseRV) -> float:
    return float(np.linalg.norm(rv.covariance() - np.eye(rv.dim)))


__all__ = [
    "ObtuseError",
    "ObtuseRV",
    "ObtuseSystem",
    "obtuse_from_probabilities",
    "random_obtuse",
    "sample",
    "sample_indices",
    "unitary_equivalence",
    "validate_obtuse",
]
