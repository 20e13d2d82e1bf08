"""Driving noise of the limit equation: synthesis from limit tensors and bracket checks.

A driver writes the N-dimensional complex martingale ``Z`` as::

    Z = G W + sum_l c_l (N_l(t) - lambda_l t)

with ``W`` independent real standard Brownian motions and ``N_l`` independent
Poisson processes of intensity ``lambda_l``.  The mixing matrix stores ``G``
followed by the columns ``sqrt(lambda_l) c_l``, i.e. the coefficients of the
normalised compensated processes ``(N_l - lambda_l t) / sqrt(lambda_l)``.

The brackets it has to reproduce are::

    [Z^i, Z^j]_t     = M^{ij}_0 t + sum_k M^{ij}_k Z^k_t
    [conj Z^i, Z^j]_t = delta_ij t + sum_k conj(M^{ik}_j) Z^k_t
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .. import rng as _rng
from .tensors import LimitTensors

UNSUPPORTED = "driver synthesis not supported for this M; supply DriverSpec manually"


class DriverSynthesisError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DriverSpec:
    n_brownian: int
    n_poisson: int
    intensities: np.ndarray  # (n_poisson,)
    mixing: np.ndarray  # (N, n_brownian + n_poisson)
    kind: str = "custom"

    def __post_init__(self):
        mixing = np.asarray(self.mixing, dtype=complex).reshape(-1, self.n_brownian + self.n_poisson)
        lam = np.asarray(self.intensities, dtype=float).reshape(self.n_poisson)
        if np.any(lam <= 0):
            raise ValueError("Poisson intensities must be positive")
        object.__setattr__(self, "mixing", mixing)
        object.__setattr__(self, "intensities", lam)

    @property
    def dim(self) -> int:
        return self.mixing.shape[0]

    @property
    def brownian_matrix(self) -> np.ndarray:
        """``G``, shape ``(N, n_brownian)``."""
        return self.mixing[:, : self.n_brownian]

    @property
    def jump_vectors(self) -> np.ndarray:
        """``c_l`` as columns, shape ``(N, n_poisson)``: the jump of ``Z`` when ``N_l`` jumps."""
        return self.mixing[:, self.n_brownian :] / np.sqrt(self.intensities)

    @property
    def drift(self) -> np.ndarray:
        """Compensator rate ``-sum_l lambda_l c_l`` of ``Z`` between jumps."""
        return -self.jump_vectors @ self.intensities

    def implied_tensors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Bracket coefficients implied by the driver.

        Returns ``(m0, mk, q)`` with ``[Z^i, Z^j] = m0 t + sum_k mk[i,j,k] Z^k``
        and ``[conj Z^i, Z^j] = q t + sum_k conj(mk[i,k,j]) Z^k`` where
        possible.  Raises if the jump parts cannot be written through ``Z``.
        """
        g, c, lam = self.brownian_matrix, self.jump_vectors, self.intensities
        n = self.dim
        m0 = g @ g.T + (c * lam) @ c.T
        q = np.conj(g) @ g.T + (np.conj(c) * lam) @ c.T
        if self.n_poisson == 0:
            return m0, np.zeros((n, n, n), dtype=complex), q
        # dual functionals: ell_l . c_m = delta_lm and ell_l . g = 0 on the Brownian span
        basis = np.hstack([c, _column_basis(g)])
        if basis.shape[1] != n or np.linalg.matrix_rank(basis) != n:
            raise DriverSynthesisError("jump vectors and Brownian span do not form a basis")
        ell = np.linalg.inv(basis)[: self.n_poisson]
        mk = np.einsum("il,jl,lk->ijk", c, c, ell)
        return m0, mk, q


def _column_basis(g: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the complex column span of ``g``."""
    if g.shape[1] == 0:
        return g
    u, s, _ = np.linalg.svd(g, full_matrices=False)
    return u[:, s > tol * max(1.0, s.max(initial=0.0))]


def bracket_residuals(driver: DriverSpec, m: LimitTensors) -> dict[str, float]:
    """Maximum deviation between the driver's implied brackets and ``m``."""
    m0, mk, q = driver.implied_tensors()
    n = m.n
    return {
        "first-constant": float(np.abs(m0 - m.m0).max()),
        "first-linear": float(np.abs(mk - m.mk).max()),
        "second-constant": float(np.abs(q - np.eye(n)).max()),
        # [conj Z^i, Z^j] jump part sum_l conj(c^i) c^j ell_l^k vs conj(M^{ik}_j)
        "second-linear": float(np.abs(_second_linear(driver) - np.conj(m.mk).transpose(0, 2, 1)).max()),
    }


def _second_linear(driver: DriverSpec) -> np.ndarray:
    n = driver.dim
    if driver.n_poisson == 0:
        return np.zeros((n, n, n), dtype=complex)
    c = driver.jump_vectors
    basis = np.hstack([c, _column_basis(driver.brownian_matrix)])
    ell = np.linalg.inv(basis)[: driver.n_poisson]
    return np.einsum("il,jl,lk->ijk", np.conj(c), c, ell)


def _jump_directions(m: LimitTensors, tol: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Joint eigenvectors ``c`` with ``sum_m M^{ij}_m c^m = c^i c^j`` (jumps) and the joint kernel."""
    n = m.n
    kmats = m.mk  # kmats[i][j, m] = M^{ij}_m
    stacked = kmats.reshape(n * n, n)
    _, s, vh = np.linalg.svd(stacked)
    scale = max(1.0, s.max(initial=0.0))
    rank = int(np.sum(s > tol * scale))
    kernel = np.conj(vh[rank:]).T  # (n, n - rank)
    if rank == 0:
        return np.zeros((n, 0), dtype=complex), kernel
    gen = _rng.stream(seed, 0, "driver")
    coef = gen.standard_normal(n) + 1j * gen.standard_normal(n)
    combo = np.tensordot(coef, kmats, axes=1)
    evals, evecs = scipy.linalg.eig(combo)
    order = np.argsort(-np.abs(evals))
    jumps = []
    for idx in order[:rank]:
        e = evecs[:, idx]
        mu = np.array([e.conj() @ kmats[i] @ e / (e.conj() @ e) for i in range(n)])
        pivot = int(np.argmax(np.abs(e)))
        c = mu[pivot] / e[pivot] * e
        jumps.append(c)
    c = np.array(jumps).T
    for l in range(c.shape[1]):
        lhs = np.einsum("ijm,m->ij", kmats, c[:, l])
        if np.abs(lhs - np.outer(c[:, l], c[:, l])).max() > max(tol, 1e-8) * scale:
            raise DriverSynthesisError(UNSUPPORTED)
    return c, kernel


def synthesize_driver(m: LimitTensors, tol: float = 1e-8, seed: int = 0) -> DriverSpec:
    """Brownian and Poisson components reproducing the brackets of ``m``.

    Jump directions are the joint eigenvectors of the matrices
    ``K_i = (M^{ij}_m)_{j,m}`` with non-zero eigenvalues; the joint kernel is
    the Brownian span.  Intensities follow from the second bracket, and the
    Brownian mixing from factoring the remaining real covariance.  Covers pure
    Brownian, pure Poisson and mixed drivers; anything else raises
    :class:`DriverSynthesisError`.
    """
    if not (np.all(np.isfinite(m.m0)) and np.all(np.isfinite(m.mk))):
        raise DriverSynthesisError("limit tensors have non-finite entries")
    n = m.n
    c, kernel = _jump_directions(m, tol, seed)
    n_p = c.shape[1]
    basis = np.hstack([c, kernel])
    if basis.shape[1] != n or np.linalg.matrix_rank(basis, tol=1e-8) != n:
        raise DriverSynthesisError(UNSUPPORTED)
    ell = np.linalg.inv(basis)[:n_p]
    lam = np.sum(np.abs(ell) ** 2, axis=1) if n_p else np.zeros(0)
    # covariance rates of the Brownian part: E[conj(Y) Y^T] and E[Y Y^T] per unit time
    q = np.eye(n) - (np.conj(c) * lam) @ c.T
    p = m.m0 - (c * lam) @ c.T
    cov = 0.5 * np.block([[np.real(q + p), np.imag(q + p)], [np.imag(p - q), np.real(q - p)]])
    cov = (cov + cov.T) / 2
    w, vecs = np.linalg.eigh(cov)
    if w.min(initial=0.0) < -max(tol, 1e-8):
        raise DriverSynthesisError(UNSUPPORTED)
    keep = w > max(tol, 1e-10)
    factor = vecs[:, keep] * np.sqrt(w[keep])
    g = factor[:n] + 1j * factor[n:]
    n_b = g.shape[1]
    kind = "brownian" if n_p == 0 else ("poisson" if n_b == 0 else "mixed")
    mixing = np.hstack([g, c * np.sqrt(lam)])
    driver = DriverSpec(n_b, n_p, lam, mixing, kind)
    residual = max(bracket_residuals(driver, m).values())
    if residual > max(tol, 10 * m.max_error):
        raise DriverSynthesisError(f"{UNSUPPORTED} (bracket residual {residual:.2e})")
    return driver


# -- Monte Carlo bracket verification ------------------------------------------


@dataclass
class BracketReport:
    """``score_*`` is the worst ratio ``|trial mean| / (z_limit * stderr + bias)`` of the terminal
    residuals (pass at <= 1); ``rms_*`` is the pathwise RMS residual, checked against ``band``."""

    score_first: float
    score_second: float
    rms_first: float
    rms_second: float
    band: float
    z_limit: float

    @property
    def passed(self) -> bool:
        return max(self.score_first, self.score_second) <= 1.0 and max(self.rms_first, self.rms_second) <= self.band

    def __str__(self) -> str:
        return (
            f"{'PASS' if self.passed else 'FAIL'}: mean scores {self.score_first:.3f}, {self.score_second:.3f} "
            f"(<= 1 at {self.z_limit} sigma); rms {self.rms_first:.3e}, {self.rms_second:.3e} (band {self.band:.3e})"
        )


def driver_increments(driver: DriverSpec, steps: int, dt: float, gen: np.random.Generator) -> np.ndarray:
    """Grid increments of ``Z`` for one trial, shape ``(steps, N)``."""
    dw = gen.standard_normal((steps, driver.n_brownian)) * np.sqrt(dt)
    dn = gen.poisson(driver.intensities * dt, size=(steps, driver.n_poisson))
    return dw @ driver.brownian_matrix.T + (dn - driver.intensities * dt) @ driver.jump_vectors.T


def verify_brackets(
    driver: DriverSpec, m: LimitTensors, t_max: float = 1.0, dt: float = 1e-4, trials: int = 1000, seed: int = 0,
    z_limit: float = 4.0,
) -> BracketReport:
    """Compare discrete quadratic covariations of simulated driver paths with the bracket relations.

    The terminal residual of each relation has mean zero up to ``O(dt)``:
    the exact compensation comes from steps with two or more jumps, which a
    finite sample rarely sees.  Its trial mean must lie within ``z_limit``
    standard errors plus a ``2 dt t sum_l lambda_l |c_l|^2`` bias allowance.
    Pathwise, Brownian terms fluctuate like ``sqrt(2 dt t)`` and jump terms
    pick up ``O(dt)`` per unit time, which defines the RMS band.
    """
    n = driver.dim
    steps = int(round(t_max / dt))
    t = steps * dt
    eye = np.eye(n)
    res1 = np.empty((trials, n, n), dtype=complex)
    res2 = np.empty((trials, n, n), dtype=complex)
    for k in range(trials):
        dz = driver_increments(driver, steps, dt, _rng.stream(seed, k, "driver"))
        z = dz.sum(axis=0)
        res1[k] = dz.T @ dz - (m.m0 * t + m.mk @ z)
        res2[k] = np.conj(dz).T @ dz - (eye * t + np.einsum("ikj,k->ij", np.conj(m.mk), z))
    g2 = float(np.sum(np.abs(driver.brownian_matrix) ** 2))
    c2 = float(np.sum(driver.intensities * np.sum(np.abs(driver.jump_vectors) ** 2, axis=0)))
    band = 5 * np.sqrt(2 * dt * t) * g2 + 10 * dt * c2 + 1e-12
    bias = 2 * dt * t * c2 + 1e-12

    def score(res):
        mean = np.abs(res.mean(axis=0))
        se = np.sqrt((res.real.var(axis=0, ddof=1) + res.imag.var(axis=0, ddof=1)) / trials)
        return float(np.max(mean / (z_limit * se + bias)))

    def rms(res):
        return float(np.sqrt(np.mean(np.abs(res) ** 2)))

    return BracketReport(score(res1), score(res2), rms(res1), rms(res2), band, z_limit)
