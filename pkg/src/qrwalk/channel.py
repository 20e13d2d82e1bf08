"""Quantum channels induced by bipartite unitaries and the canonical form of
classical unitaries.

A classical unitary on H (x) K, K = C^{N+1}, is ``U = sum_i U_i (x) |phi_i><phi_i|``
for an orthonormal basis ``{phi_i}`` of K and unitaries ``U_i`` on H.  With the
environment prepared in ``e_0`` it decomposes as::

    U = A (x) I + sum_j B_j (x) M_j

where ``M_j`` is the multiplication matrix of the coordinate ``X^j`` of the
obtuse random variable with law ``p_i = |<e_0, phi_i>|^2`` and values
``v_i^j = <phi_i|e_j> / <phi_i|e_0>``, ``A = sum_i p_i U_i`` and
``B_j = sum_i p_i conj(v_i^j) U_i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .numerics import (
    CDTYPE,
    STRUCT_TOL,
    DimensionError,
    as_cmatrix,
    dagger,
    frobenius_distance,
    is_density_matrix,
    is_unitary,
    partial_trace_env,
    random_unitary,
)
from .obtuse import ObtuseRV, ObtuseSystem, validate_obtuse
from .tensor3 import ThreeTensor, multiplication_matrices, tensor_from_rv

#: |<e_0, phi_i>| below this is treated as a vanishing overlap
OVERLAP_FLOOR = 1e-12
RECONSTRUCTION_TOL = 1e-9
CONSISTENCY_LIMIT = 1e-6


class OverlapError(ValueError):
    """A branch vector is orthogonal to the reference state ``e_0``."""


class ConsistencyError(RuntimeError):
    """The canonical form failed to reproduce ``U``; signals a convention bug."""


# -- channels ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    dim: int
    krauss: tuple[np.ndarray, ...]

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=CDTYPE)
        out = np.zeros((self.dim, self.dim), dtype=CDTYPE)
        for k in self.krauss:
            out += k @ rho @ dagger(k)
        return out

    def completeness_residual(self) -> float:
        total = sum(dagger(k) @ k for k in self.krauss)
        return frobenius_distance(total, np.eye(self.dim))

    def choi(self) -> np.ndarray:
        """``sum_ab |a><b| (x) L(|a><b|)``."""
        d = self.dim
        out = np.zeros((d * d, d * d), dtype=CDTYPE)
        for k in self.krauss:
            w = k.T.reshape(-1)  # w[a*d + c] = k[c, a]
            out += np.outer(w, np.conj(w))
        return out

    def power(self, rho, n: int) -> np.ndarray:
        out = np.asarray(rho, dtype=CDTYPE)
        for _ in range(n):
            out = self(out)
        return out


def make_channel(krauss: Sequence[np.ndarray], tol: float = STRUCT_TOL) -> QuantumChannel:
    ks = tuple(as_cmatrix(k, "Krauss operator") for k in krauss)
    if not ks:
        raise ValueError("a channel needs at least one Krauss operator")
    d = ks[0].shape[0]
    if any(k.shape != (d, d) for k in ks):
        raise DimensionError("Krauss operators must all be square of the same size")
    ch = QuantumChannel(d, ks)
    if ch.completeness_residual() > tol:
        raise ValueError("Krauss operators are not trace preserving: sum L^* L != I")
    return ch


def channel_from_unitary(u, omega, dim_sys: int, dim_env: int) -> QuantumChannel:
    """``rho -> Tr_K(U (rho (x) omega) U^*)`` in Krauss form.

    With ``omega = sum_k lambda_k |g_k><g_k|`` the Krauss operators are
    ``sqrt(lambda_k) (I (x) <e_i|) U (I (x) |g_k>)``.
    """
    u = as_cmatrix(u, "u")
    omega = as_cmatrix(omega, "omega")
    n = dim_sys * dim_env
    if u.shape != (n, n):
        raise DimensionError(f"u must be {n}x{n}, got {u.shape}")
    if omega.shape != (dim_env, dim_env):
        raise DimensionError(f"omega must be {dim_env}x{dim_env}, got {omega.shape}")
    if not is_unitary(u):
        raise ValueError("u is not unitary")
    if not is_density_matrix(omega):
        raise ValueError("omega is not a density matrix")
    lam, g = np.linalg.eigh((omega + dagger(omega)) / 2)
    u4 = u.reshape(dim_sys, dim_env, dim_sys, dim_env)
    krauss = []
    for lk, gk in zip(lam, g.T):
        if lk <= 1e-15:
            continue
        block = np.einsum("aibj,j->iab", u4, gk)  # (I (x) <e_i|) U (I (x) |g_k>)
        krauss.extend(np.sqrt(lk) * block)
    return QuantumChannel(dim_sys, tuple(krauss))


def channels_equal(a: QuantumChannel, b: QuantumChannel, tol: float = STRUCT_TOL) -> bool:
    if a.dim != b.dim:
        return False
    return frobenius_distance(a.choi(), b.choi()) <= tol


# -- classical unitaries -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class Decomposition:
    probabilities: np.ndarray
    rv: ObtuseRV
    a: np.ndarray
    b: np.ndarray  # shape (N, d, d)
    tensor: ThreeTensor
    residual: float  # ||U - (A (x) I + sum_j B_j (x) M_j)||_F
    trace_residual: float  # partial-trace formulas for A and B_j
    branch_residual: float  # max_i ||A + sum_j B_j v_i^j - U_i||_F

    def __iter__(self):
        # allows ``p, rv, A, B = decompose(u)``
        return iter((self.probabilities, self.rv, self.a, self.b))


@dataclass(frozen=True, eq=False)
class ClassicalUnitary:
    """``U = sum_i U_i (x) |phi_i><phi_i|`` together with its canonical form.

    ``phis[i]`` is ``phi_i`` (a row), ``unitaries[i]`` is ``U_i``.
    """

    dim_sys: int
    dim_env: int
    phis: np.ndarray
    unitaries: np.ndarray
    u_total: np.ndarray
    decomposition: Decomposition

    @property
    def probabilities(self) -> np.ndarray:
        return self.decomposition.probabilities

    @property
    def rv(self) -> ObtuseRV:
        return self.decomposition.rv

    @property
    def a(self) -> np.ndarray:
        return self.decomposition.a

    @property
    def b(self) -> np.ndarray:
        return self.decomposition.b

    @property
    def tensor(self) -> ThreeTensor:
        return self.decomposition.tensor

    @property
    def branches(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(zip(self.phis, self.unitaries))

    def step_operator(self, x: np.ndarray) -> np.ndarray:
        """``A + sum_j B_j x^j`` for a value ``x`` of the obtuse random variable."""
        return self.a + np.tensordot(x, self.b, axes=1)


def assemble(phis: np.ndarray, unitaries: np.ndarray) -> np.ndarray:
    return sum(np.kron(ui, np.outer(phi, np.conj(phi))) for phi, ui in zip(phis, unitaries))


def _canonical_form(phis: np.ndarray, unitaries: np.ndarray, u_total: np.ndarray) -> Decomposition:
    dim_env = phis.shape[0]
    d = unitaries.shape[1]
    overlaps = phis[:, 0]  # <e_0, phi_i>
    small = np.flatnonzero(np.abs(overlaps) < OVERLAP_FLOOR)
    if small.size:
        raise OverlapError(
            f"reference-state overlap vanishes for branch {small[0] + 1}; "
            "choose different e_0 or reorder basis"
        )
    p = np.abs(overlaps) ** 2
    # v_i^j = <phi_i|e_j> / <phi_i|e_0> = conj(phi_i[j]) / conj(phi_i[0])
    vectors = np.conj(phis[:, 1:]) / np.conj(overlaps)[:, None]
    system = validate_obtuse(vectors)
    rv = ObtuseRV(ObtuseSystem(system.vectors, p))
    a = np.tensordot(p, unitaries, axes=1)
    b = np.einsum("i,ij,iab->jab", p, np.conj(vectors), unitaries)
    tensor = tensor_from_rv(rv)
    mats = multiplication_matrices(tensor)
    recon = np.kron(a, np.eye(dim_env)) + sum(np.kron(b[j], mats[j + 1]) for j in range(dim_env - 1))
    residual = frobenius_distance(recon, u_total)

    def env_op(k, l):  # I (x) |e_k><e_l|
        m = np.zeros((dim_env, dim_env), dtype=CDTYPE)
        m[k, l] = 1.0
        return np.kron(np.eye(d), m)

    trace_a = partial_trace_env(u_total @ env_op(0, 0), d, dim_env)
    trace_res = frobenius_distance(trace_a, a)
    for j in range(1, dim_env):
        trace_b = partial_trace_env(u_total @ env_op(0, j), d, dim_env)
        trace_res = max(trace_res, frobenius_distance(trace_b, b[j - 1]))
    branch_res = max(
        frobenius_distance(a + np.tensordot(vectors[i], b, axes=1), unitaries[i]) for i in range(dim_env)
    )
    worst = max(residual, trace_res, branch_res)
    if worst > CONSISTENCY_LIMIT:
        raise ConsistencyError(f"canonical form residual {worst:.3e} exceeds {CONSISTENCY_LIMIT:g}")
    return Decomposition(p, rv, a, b, tensor, residual, trace_res, branch_res)


def build_classical_unitary(branches: Sequence[tuple], tol: float = STRUCT_TOL) -> ClassicalUnitary:
    """Assemble ``sum_i U_i (x) |phi_i><phi_i|`` from ``[(phi_i, U_i), ...]`` and decompose it."""
    if len(branches) < 2:
        raise ValueError("need at least two branches (dim K >= 2)")
    phis = np.array([np.asarray(phi, dtype=CDTYPE) for phi, _ in branches])
    unitaries = np.array([as_cmatrix(ui, "U_i") for _, ui in branches])
    dim_env = len(branches)
    if phis.shape != (dim_env, dim_env):
        raise DimensionError(f"expected {dim_env} vectors in C^{dim_env}, got {phis.shape}")
    if unitaries.ndim != 3 or unitaries.shape[1] != unitaries.shape[2]:
        raise DimensionError("branch unitaries must be square and of equal size")
    if frobenius_distance(phis @ dagger(phis), np.eye(dim_env)) > tol:
        raise ValueError("branch vectors are not orthonormal")
    for i, ui in enumerate(unitaries):
        if not is_unitary(ui, tol):
            raise ValueError(f"U_{i + 1} is not unitary")
    u_total = assemble(phis, unitaries)
    dec = _canonical_form(phis, unitaries, u_total)
    return ClassicalUnitary(unitaries.shape[1], dim_env, phis, unitaries, u_total, dec)


def decompose(u: ClassicalUnitary) -> Decomposition:
    """Recompute ``(p, rv, A, B)`` for ``u``; the result unpacks as a 4-tuple."""
    return _canonical_form(u.phis, u.unitaries, u.u_total)


def branches_from_obtuse(system: ObtuseSystem, unitaries: Sequence[np.ndarray]) -> list[tuple]:
    """Branch vectors ``phi_i = sqrt(p_i) (1, conj(v_i))`` realising a given obtuse system."""
    phis = np.sqrt(system.probabilities)[:, None] * np.hstack(
        [np.ones((system.n_outcomes, 1)), np.conj(system.vectors)]
    )
    return list(zip(phis, unitaries))


def random_classical_unitary(dim_sys: int, dim_env: int, gen: np.random.Generator) -> ClassicalUnitary:
    """Haar-random branch basis and branch unitaries."""
    phis = random_unitary(dim_env, gen).T
    us = [random_unitary(dim_sys, gen) for _ in range(dim_env)]
    return build_classical_unitary(list(zip(phis, us)))


# -- checks ------------------------------------------------------------------


@dataclass
class BasisChangeReport:
    a_residual: float
    b_residual: float
    values_residual: float
    reconstruction_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.a_residual, self.b_residual, self.values_residual, self.reconstruction_residual) <= self.tol


def basis_change_invariance_check(u: ClassicalUnitary, r, tol: float = RECONSTRUCTION_TOL) -> BasisChangeReport:
    """Redo the decomposition in the basis ``{e_0, f_1, .., f_N}``, ``f_j = sum_k r[k, j] e_k``.

    Expected: ``A`` unchanged, ``B~_j = sum_k conj(r[k, j]) B_k``, new values
    ``w_i = r^T v_i`` and the same ``U`` once mapped back to the old basis.
    """
    r = as_cmatrix(r, "r")
    n = u.dim_env - 1
    if r.shape != (n, n) or not is_unitary(r):
        raise ValueError(f"r must be a {n}x{n} unitary")
    # coordinates in the new basis: phi~ = diag(1, r^*) phi
    omega = scipy.linalg.block_diag(np.eye(1), dagger(r))
    new_phis = (omega @ u.phis.T).T
    dec = _canonical_form(new_phis, u.unitaries, assemble(new_phis, u.unitaries))
    b_expected = np.einsum("kj,kab->jab", np.conj(r), u.b)
    w_expected = u.rv.values @ r
    mats = multiplication_matrices(dec.tensor)
    recon = np.kron(dec.a, np.eye(u.dim_env)) + sum(np.kron(dec.b[j], mats[j + 1]) for j in range(n))
    big = np.kron(np.eye(u.dim_sys), omega)
    back = dagger(big) @ recon @ big
    return BasisChangeReport(
        a_residual=frobenius_distance(dec.a, u.a),
        b_residual=frobenius_distance(dec.b, b_expected),
        values_residual=frobenius_distance(dec.rv.values, w_expected),
        reconstruction_residual=frobenius_distance(back, u.u_total),
        tol=tol,
    )


@dataclass
class ActionReport:
    random_unitary_state: np.ndarray
    channel_state: np.ndarray
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol


def random_unitary_action(u: ClassicalUnitary, rho, omega=None, tol: float = STRUCT_TOL) -> ActionReport:
    """Compare ``sum_i <phi_i|omega|phi_i> U_i rho U_i^*`` with ``Tr_K(U (rho (x) omega) U^*)``.

    ``omega`` defaults to ``|e_0><e_0|``, where the weights are the ``p_i``.
    """
    rho = as_cmatrix(rho, "rho")
    if omega is None:
        omega = np.zeros((u.dim_env, u.dim_env), dtype=CDTYPE)
        omega[0, 0] = 1.0
    omega = as_cmatrix(omega, "omega")
    weights = np.real(np.einsum("ia,ab,ib->i", np.conj(u.phis), omega, u.phis))
    lhs = sum(w * ui @ rho @ dagger(ui) for w, ui in zip(weights, u.unitaries))
    rhs = channel_from_unitary(u.u_total, omega, u.dim_sys, u.dim_env)(rho)
    return ActionReport(lhs, rhs, frobenius_distance(lhs, rhs), tol)


@dataclass
class BranchFormResult:
    found: bool
    residual: float
    unitary: ClassicalUnitary | None = None


def is_branch_form(u, dim_sys: int, dim_env: int, tol: float = RECONSTRUCTION_TOL, seed: int = 0) -> BranchFormResult:
    """Heuristic test for ``U = sum_i U_i (x) |phi_i><phi_i|``.

    Contracts the environment blocks ``U^{ab}`` with a random functional; for a
    branch-form ``U`` the resulting K-matrix is normal with eigenvectors
    ``phi_i``.  Degenerate spectra or non-branch ``U`` report ``found=False``.
    This does not decide whether every classical unitary has branch form.
    """
    u = as_cmatrix(u, "u")
    n = dim_sys * dim_env
    if u.shape != (n, n):
        raise DimensionError(f"u must be {n}x{n}")
    blocks = u.reshape(dim_sys, dim_env, dim_sys, dim_env).transpose(1, 3, 0, 2)  # [a, b] -> U^{ab}
    gen = np.random.default_rng(seed)
    probe = gen.standard_normal((dim_sys, dim_sys)) + 1j * gen.standard_normal((dim_sys, dim_sys))
    kmat = np.einsum("abxy,yx->ab", blocks, probe)
    _, z = scipy.linalg.schur(kmat, output="complex")
    phis = z.T  # rows are candidate phi_i
    unitaries = np.einsum("ia,abxy,ib->ixy", np.conj(phis), blocks, phis)
    residual = frobenius_distance(assemble(phis, unitaries), u)
    if residual > tol or not all(is_unitary(x, max(tol, STRUCT_TOL)) for x in unitaries):
        return BranchFormResult(False, residual)
    try:
        cu = build_classical_unitary(list(zip(phis, unitaries)), tol=max(tol, STRUCT_TOL))
    except (OverlapError, ValueError):
        return BranchFormResult(True, residual)
    return BranchFormResult(True, residual, cu)
