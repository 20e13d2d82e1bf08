"""The 3-tensor ``S^{ij}_k = E[X^i X^j conj(X^k)]`` of an obtuse random variable.

Indices run over ``0..N`` with the convention ``X^0 = 1``.  Coefficients are
stored densely as ``coeffs[i, j, k]``.

The multiplication operator by ``X^i``, transported to C^{N+1} by the
isomorphism ``X^k -> e_k``, is the matrix with entry ``S^{ij}_k`` in row ``k``,
column ``j`` (elementary matrices ``a^j_k = |e_k><e_j|``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .numerics import CDTYPE, dagger
from .obtuse import ObtuseRV, validate_obtuse


@dataclass(frozen=True, eq=False)
class ThreeTensor:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=CDTYPE)
        if c.ndim != 3 or len(set(c.shape)) != 1:
            raise ValueError(f"coefficients must be a cube, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("tensor has non-finite coefficients")
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.shape[0] - 1

    def __getitem__(self, idx):
        return self.coeffs[idx]


def tensor_from_rv(rv: ObtuseRV) -> ThreeTensor:
    x = rv.system.extended_values()
    s = np.einsum("m,mi,mj,mk->ijk", rv.probabilities, x, x, np.conj(x))
    return ThreeTensor(s)


# -- verification ------------------------------------------------------------

#: names of the symmetry families checked by :func:`verify_double_symmetry`
SYMMETRY_FAMILIES = (
    "unit",  # S^{i0}_k = delta_ik
    "ij-symmetry",  # S^{ij}_k = S^{ji}_k
    "associativity",  # sum_m S^{im}_j S^{kl}_m symmetric in (i, k)
    "normality",  # sum_m S^{im}_j conj(S^{lm}_k) symmetric in (i, k)
)


@dataclass
class CheckReport:
    tol: float
    violations: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.violations.values())

    @property
    def failures(self) -> list[str]:
        return [k for k, v in self.violations.items() if v > self.tol]

    @property
    def max_violation(self) -> float:
        return max(self.violations.values(), default=0.0)

    def __str__(self) -> str:
        parts = ", ".join(f"{k}={v:.3e}" for k, v in self.violations.items())
        return f"{'PASS' if self.passed else 'FAIL'} (tol={self.tol:g}): {parts}"


def symmetry_violations(t: ThreeTensor) -> dict[str, float]:
    s = t.coeffs
    eye = np.eye(s.shape[0])
    unit = np.max(np.abs(s[:, 0, :] - eye))
    ij = np.max(np.abs(s - s.transpose(1, 0, 2)))
    # T2[i, j, k, l] = sum_m S[i, m, j] S[k, l, m]
    t2 = np.einsum("imj,klm->ijkl", s, s)
    assoc = np.max(np.abs(t2 - t2.transpose(2, 1, 0, 3)))
    # T3[i, j, k, l] = sum_m S[i, m, j] conj(S[l, m, k])
    t3 = np.einsum("imj,lmk->ijkl", s, np.conj(s))
    normal = np.max(np.abs(t3 - t3.transpose(2, 1, 0, 3)))
    return dict(zip(SYMMETRY_FAMILIES, map(float, (unit, ij, assoc, normal))))


def verify_double_symmetry(t: ThreeTensor, tol: float = 1e-12) -> CheckReport:
    return CheckReport(tol, symmetry_violations(t))


def verify_product_relation(t: ThreeTensor, rv: ObtuseRV, tol: float = 1e-12) -> CheckReport:
    """Check ``X^i X^j = sum_k S^{ij}_k X^k`` and ``conj(X^i) X^j = sum_k conj(S^{ik}_j) X^k``
    on every outcome."""
    x = rv.system.extended_values()
    s = t.coeffs
    if s.shape[0] != x.shape[1]:
        raise ValueError("tensor and random variable have different dimensions")
    lhs = x[:, :, None] * x[:, None, :]
    rhs = np.einsum("ijk,wk->wij", s, x)
    lhs_bar = np.conj(x)[:, :, None] * x[:, None, :]
    rhs_bar = np.einsum("ikj,wk->wij", np.conj(s), x)
    return CheckReport(
        tol,
        {
            "product": float(np.max(np.abs(lhs - rhs))),
            "conjugate-product": float(np.max(np.abs(lhs_bar - rhs_bar))),
        },
    )


# -- multiplication operators -----------------------------------------------


def _check_index(t: ThreeTensor, i: int) -> None:
    if not 0 <= i <= t.n:
        raise IndexError(f"index {i} outside 0..{t.n}")


def multiplication_matrix(t: ThreeTensor, i: int) -> np.ndarray:
    """Matrix of multiplication by ``X^i``: entry ``(k, j)`` is ``S^{ij}_k``."""
    _check_index(t, i)
    return t.coeffs[i].T.copy()


def conjugate_multiplication_matrix(t: ThreeTensor, i: int) -> np.ndarray:
    """Matrix of multiplication by ``conj(X^i)``: entry ``(k, j)`` is ``conj(S^{ik}_j)``."""
    _check_index(t, i)
    return np.conj(t.coeffs[i]).copy()


def multiplication_matrices(t: ThreeTensor) -> np.ndarray:
    """Stack of all multiplication matrices, shape ``(N+1, N+1, N+1)``."""
    return t.coeffs.transpose(0, 2, 1).copy()


def rv_from_tensor(t: ThreeTensor, seed: int = 0, tol: float = 1e-8) -> ObtuseRV:
    """Recover the obtuse random variable (in law) by joint diagonalisation.

    The multiplication matrices commute and are normal; a generic complex
    combination has simple spectrum and its Schur vectors are the common
    eigenvectors ``sqrt(p_m) (1, conj(v_m))``.
    """
    mats = multiplication_matrices(t)
    gen = np.random.default_rng(seed)
    coef = gen.standard_normal(t.n + 1) + 1j * gen.standard_normal(t.n + 1)
    combo = np.tensordot(coef, mats, axes=1)
    _, z = scipy.linalg.schur(combo, output="complex")
    # z columns are orthonormal eigenvectors (combo is normal)
    p = np.abs(z[0, :]) ** 2
    if np.any(p < tol):
        raise ValueError("eigenvector with vanishing first coordinate; tensor is not from an obtuse RV")
    vectors = np.conj(z[1:, :] / z[0, :]).T
    residual = max(
        np.linalg.norm(mats[i] @ z - z * np.diag(dagger(z) @ mats[i] @ z)) for i in range(t.n + 1)
    )
    if residual > tol * max(1.0, np.abs(t.coeffs).max()):
        raise ValueError("multiplication matrices are not jointly diagonalisable")
    return ObtuseRV(validate_obtuse(vectors, tol=max(tol, 1e-10)))


