"""Repeated interactions seen as a random walk on the unitary group of H.

After ``n`` interactions with fresh environment copies in state ``e_0`` the
system evolves by ``V_n = U_{i_n} ... U_{i_1}`` where the outcome indices are
i.i.d. with law ``p``.  Equivalently ``V_{k+1} = (A + sum_j B_j X_{k+1}^j) V_k``
with ``X`` the obtuse random variable of the decomposition.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.stats

from . import kernels
from . import rng as _rng
from .channel import ClassicalUnitary, channel_from_unitary
from .numerics import CDTYPE, DimensionError, as_cmatrix, dagger, is_unitary
from .obtuse import sample_indices

#: largest ``dim_sys * dim_env**n`` accepted by :func:`full_tensor_evolution`
TENSOR_BUDGET = 4096
#: trials per batch handed to the product kernel
CHUNK = 2048


@dataclass(frozen=True, eq=False)
class WalkTrajectory:
    """``unitaries[k]`` is ``V_k`` (``V_0 = I``); with ``keep_path=False`` only ``V_n`` is kept."""

    steps: int
    seed: int
    trial: int
    outcome_indices: np.ndarray  # 0-based, length steps
    unitaries: np.ndarray

    @property
    def terminal(self) -> np.ndarray:
        return self.unitaries[-1]

    def all_unitary(self, tol: float = 1e-9) -> bool:
        return all(is_unitary(v, tol) for v in self.unitaries)


def outcome_sequences(u: ClassicalUnitary, steps: int, seed: int, trials: int, first_trial: int = 0) -> np.ndarray:
    """Outcome indices for trials ``first_trial .. first_trial + trials - 1``, shape ``(trials, steps)``.

    Row ``t`` depends only on ``(seed, first_trial + t)``.
    """
    out = np.empty((trials, steps), dtype=np.intp)
    if steps == 0:
        return out
    p = u.probabilities
    for t in range(trials):
        out[t] = sample_indices(p, _rng.stream(seed, first_trial + t, "outcomes"), steps)
    return out


def _check_step_identity(u: ClassicalUnitary, used: np.ndarray, tol: float) -> None:
    # the representation A + sum_j B_j v_i^j must give back U_i on every branch taken
    for i in np.unique(used):
        res = np.linalg.norm(u.step_operator(u.rv.values[i]) - u.unitaries[i])
        if res > tol:
            raise RuntimeError(f"branch {i + 1}: A + sum_j B_j v^j differs from U_i by {res:.3e}")


def simulate_walk(
    u: ClassicalUnitary, steps: int, seed: int, trial: int = 0, keep_path: bool = True, verify: bool = True
) -> WalkTrajectory:
    if steps < 0:
        raise ValueError("steps must be >= 0")
    outcomes = outcome_sequences(u, steps, seed, 1, trial)[0]
    if verify and steps:
        _check_step_identity(u, outcomes, 1e-9)
    d = u.dim_sys
    v = np.eye(d, dtype=CDTYPE)
    if keep_path:
        path = np.empty((steps + 1, d, d), dtype=CDTYPE)
        path[0] = v
        for k, i in enumerate(outcomes):
            v = u.unitaries[i] @ v
            path[k + 1] = v
    else:
        path = kernels.walk_products(u.unitaries, outcomes[None, :], v[None])
    return WalkTrajectory(steps, seed, trial, outcomes, path)


def _chunks(trials: int, size: int = CHUNK):
    return [(s, min(size, trials - s)) for s in range(0, trials, size)]


def _map_chunks(fn, trials: int, jobs: int):
    chunks = _chunks(trials)
    if jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda c: fn(*c), chunks))
    return [fn(*c) for c in chunks]


def terminal_unitaries(u: ClassicalUnitary, steps: int, trials: int, seed: int, jobs: int = 1) -> np.ndarray:
    """``V_n`` for every trial, shape ``(trials, d, d)``; trial ``t`` equals ``simulate_walk(u, n, seed, t).terminal``."""
    d = u.dim_sys

    def run(first, count):
        outcomes = outcome_sequences(u, steps, seed, count, first)
        v0 = np.broadcast_to(np.eye(d, dtype=CDTYPE), (count, d, d))
        return kernels.walk_products(u.unitaries, outcomes, v0)

    return np.concatenate(_map_chunks(run, trials, jobs))


def complex_stderr(samples: np.ndarray) -> np.ndarray:
    """Standard error of the mean of complex samples (axis 0), ``sqrt(var Re + var Im) / sqrt(T)``."""
    t = samples.shape[0]
    if t < 2:
        return np.zeros(samples.shape[1:])
    var = np.var(samples.real, axis=0, ddof=1) + np.var(samples.imag, axis=0, ddof=1)
    return np.sqrt(var / t)


def monte_carlo_channel(
    u: ClassicalUnitary, rho, steps: int, trials: int, seed: int, jobs: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Average of ``V_n rho V_n^*`` over trials, with its per-entry standard error."""
    rho = as_cmatrix(rho, "rho")
    if steps == 0:
        return rho.copy(), np.zeros(rho.shape)
    v = terminal_unitaries(u, steps, trials, seed, jobs)
    states = v @ rho @ dagger(v)
    return states.mean(axis=0), complex_stderr(states)


def channel_power(u: ClassicalUnitary, rho, n: int) -> np.ndarray:
    """``L^n(rho)`` for ``L(rho) = Tr_K(U (rho (x) |e_0><e_0|) U^*)``."""
    omega = np.zeros((u.dim_env, u.dim_env), dtype=CDTYPE)
    omega[0, 0] = 1.0
    return channel_from_unitary(u.u_total, omega, u.dim_sys, u.dim_env).power(rho, n)


def _check_budget(u: ClassicalUnitary, n: int) -> None:
    if n < 0:
        raise ValueError("n must be >= 0")
    size = u.dim_sys * u.dim_env**n
    if size > TENSOR_BUDGET:
        raise DimensionError(f"dim_sys * dim_env**n = {size} exceeds the budget {TENSOR_BUDGET}")


def chain_columns(u: ClassicalUnitary, n: int) -> np.ndarray:
    """``V_n (I (x) |e_0 ... e_0>)`` on ``H (x) K^{(x)n}``, shape ``(d, K, ..., K, d)``.

    Site ``k`` is acted on by the ``k``-th interaction; sites are ordered
    after H in interaction order.
    """
    _check_budget(u, n)
    d, k = u.dim_sys, u.dim_env
    u0 = u.u_total.reshape(d, k, d, k)[:, :, :, 0]  # U (I (x) |e_0>)
    x = np.eye(d, dtype=CDTYPE)
    for step in range(n):
        x = x.reshape(d, k**step, d)
        x = np.einsum("ajc,csb->asjb", u0, x)
    return x.reshape((d,) + (k,) * n + (d,))


def ampliated_operator(u: ClassicalUnitary, n: int) -> np.ndarray:
    """The full unitary ``V_n`` on ``H (x) K^{(x)n}`` (small sizes only)."""
    _check_budget(u, n)
    d, k = u.dim_sys, u.dim_env
    u4 = u.u_total.reshape(d, k, d, k)
    total = d * k**n
    v = np.eye(total, dtype=CDTYPE)
    for step in range(n):
        before, after = k**step, k ** (n - step - 1)
        v = v.reshape(d, before, k, after, total)
        # U acts on H and site ``step``
        v = np.einsum("ajcl,cblsx->abjsx", u4, v)
        v = v.reshape(total, total)
    return v


def full_tensor_evolution(u: ClassicalUnitary, n: int, rho) -> np.ndarray:
    """``Tr_env(V_n (rho (x) |e_0..e_0><e_0..e_0|) V_n^*)`` computed on ``H (x) K^{(x)n}``."""
    rho = as_cmatrix(rho, "rho")
    d = u.dim_sys
    x = chain_columns(u, n).reshape(d, -1, d)
    return np.einsum("asb,bc,esc->ae", x, rho, np.conj(x))


def martingale_residual(u: ClassicalUnitary, v) -> float:
    """``||sum_i p_i U_i V - A V||_F``, zero because the walk increments are centred."""
    v = as_cmatrix(v, "v")
    avg = np.tensordot(u.probabilities, u.unitaries, axes=1) @ v
    return float(np.linalg.norm(avg - u.a @ v))


def outcome_law_pvalue(u: ClassicalUnitary, steps: int, trials: int, seed: int) -> float:
    """Chi-square p-value of the observed outcome sequences against the product law."""
    if not 1 <= steps <= 4:
        raise ValueError("outcome law test supports 1 <= steps <= 4")
    k = u.dim_env
    seqs = outcome_sequences(u, steps, seed, trials)
    codes = np.ravel_multi_index(seqs.T, (k,) * steps)
    observed = np.bincount(codes, minlength=k**steps)
    p = u.probabilities
    expected = p
    for _ in range(steps - 1):
        expected = np.outer(expected, p).ravel()
    return float(scipy.stats.chisquare(observed, expected * trials).pvalue)


def first_occurrence_steps(
    u: ClassicalUnitary, outcome: int, trials: int, seed: int, block: int = 4096, max_steps: int = 10**8
) -> np.ndarray:
    """Step (1-based) of the first occurrence of ``outcome`` in each trial's walk.

    Draws the same stream as :func:`simulate_walk`, block by block.
    """
    p = u.probabilities
    out = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        gen = _rng.stream(seed, t, "outcomes")
        offset = 0
        while True:
            hits = np.flatnonzero(sample_indices(p, gen, block) == outcome)
            if hits.size:
                out[t] = offset + hits[0] + 1
                break
            offset += block
            if offset >= max_steps:
                raise RuntimeError(f"outcome {outcome + 1} not seen within {max_steps} steps")
    return out
