"""Dense complex linear algebra shared by every other module.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Inner products
are conjugate-linear in the first argument and Kronecker products put the
system factor first, the environment factor second.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

CDTYPE = np.complex128

#: tolerance for structural checks (unitarity, density matrices)
STRUCT_TOL = 1e-10
#: tolerance for algebraic identities on small matrices
ALGEBRA_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


def as_cmatrix(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=CDTYPE)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def as_cvector(v, name: str = "vector") -> np.ndarray:
    a = np.asarray(v, dtype=CDTYPE)
    if a.ndim != 1 or a.size < 1:
        raise DimensionError(f"{name} must be a non-empty 1-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def inner(u: np.ndarray, v: np.ndarray) -> complex:
    """``<u|v>``, conjugating the first argument."""
    return complex(np.vdot(u, v))


def frobenius(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def frobenius_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


def tensor_product(a, b) -> np.ndarray:
    """Kronecker product with entry ``(i*rb + k, j*cb + l) = a[i, j] * b[k, l]``."""
    return np.kron(as_cmatrix(a, "a"), as_cmatrix(b, "b"))


def partial_trace_env(m, dim_sys: int, dim_env: int) -> np.ndarray:
    """Trace out the second (environment) factor of an operator on H (x) K."""
    m = as_cmatrix(m)
    n = dim_sys * dim_env
    if m.shape != (n, n):
        raise DimensionError(
            f"expected a {n}x{n} operator for dims ({dim_sys}, {dim_env}), got {m.shape}"
        )
    return np.einsum("ikjk->ij", m.reshape(dim_sys, dim_env, dim_sys, dim_env))


def partial_trace_sys(m, dim_sys: int, dim_env: int) -> np.ndarray:
    m = as_cmatrix(m)
    n = dim_sys * dim_env
    if m.shape != (n, n):
        raise DimensionError(f"expected a {n}x{n} operator, got {m.shape}")
    return np.einsum("kikj->ij", m.reshape(dim_sys, dim_env, dim_sys, dim_env))


def matrix_exponential(m) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade approximants)."""
    m = as_cmatrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix_exponential needs a square matrix, got {m.shape}")
    return scipy.linalg.expm(m)


def is_unitary(m, tol: float = STRUCT_TOL) -> bool:
    m = np.asarray(m, dtype=CDTYPE)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    eye = np.eye(m.shape[0])
    return (
        frobenius_distance(m @ dagger(m), eye) <= tol
        and frobenius_distance(dagger(m) @ m, eye) <= tol
    )


def is_hermitian(m, tol: float = STRUCT_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and frobenius_distance(m, dagger(m)) <= tol


def is_density_matrix(m, tol: float = STRUCT_TOL) -> bool:
    m = np.asarray(m, dtype=CDTYPE)
    if not is_hermitian(m, tol):
        return False
    if abs(np.trace(m) - 1.0) > tol:
        return False
    return bool(np.linalg.eigvalsh((m + dagger(m)) / 2).min() >= -tol)


def projector(v) -> np.ndarray:
    v = as_cvector(v)
    return np.outer(v, np.conj(v))


def basis_vector(dim: int, k: int) -> np.ndarray:
    e = np.zeros(dim, dtype=CDTYPE)
    e[k] = 1.0
    return e


# -- random instances (tests, CLI --random) ---------------------------------


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR with phase correction."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = (z + dagger(z)) / 2
    return scale * h / max(np.linalg.norm(h, 2), 1e-300)


def random_antihermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    return 1j * random_hermitian(dim, rng, scale)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    z = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = z @ dagger(z)
    return rho / np.trace(rho).real
