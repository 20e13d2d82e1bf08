"""Euler-Maruyama integration of ``dU = A~ U dt + sum_j B~_j U dZ^j`` with exact jump times.

Each trial draws its Poisson jump times on ``[0, t_max]`` from exponential
clocks, then the Gaussian increments it needs, from its own stream.  The
``dt``-grid step containing jumps is split into sub-intervals at the jump
times: each sub-interval gets an Euler update with its own Brownian increment,
and each jump multiplies by ``I + sum_j c_l^j B~_j``.  The draws of a trial
therefore do not depend on which other trials share its batch.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import kernels
from .. import rng as _rng
from ..numerics import CDTYPE, DimensionError
from .driver import DriverSpec

CHUNK = 1024


@dataclass(frozen=True, eq=False)
class SDEModel:
    a_tilde: np.ndarray
    b_tilde: np.ndarray  # (N, d, d)
    driver: DriverSpec

    def __post_init__(self):
        a = np.asarray(self.a_tilde, dtype=CDTYPE)
        b = np.asarray(self.b_tilde, dtype=CDTYPE)
        d = a.shape[0]
        if a.shape != (d, d):
            raise DimensionError("A~ must be square")
        if b.ndim != 3 or b.shape[1:] != (d, d):
            raise DimensionError("B~ must be a stack of d x d matrices")
        if b.shape[0] != self.driver.dim:
            raise DimensionError(f"{b.shape[0]} noise operators but the driver has dimension {self.driver.dim}")
        object.__setattr__(self, "a_tilde", a)
        object.__setattr__(self, "b_tilde", b)

    @property
    def dim_sys(self) -> int:
        return self.a_tilde.shape[0]

    def jump_operators(self) -> np.ndarray:
        """``I + sum_j c_l^j B~_j`` for each Poisson component ``l``."""
        c = self.driver.jump_vectors
        eye = np.eye(self.dim_sys, dtype=CDTYPE)
        return eye + np.einsum("jl,jab->lab", c, self.b_tilde)


@dataclass(frozen=True, eq=False)
class SDEPath:
    times: np.ndarray
    unitaries: np.ndarray  # (len(times), d, d) or (1, d, d) for terminal-only runs
    jump_times: list  # per Poisson component, sorted array of times

    @property
    def terminal(self) -> np.ndarray:
        return self.unitaries[-1]


def _trial_noise(driver: DriverSpec, t_max: float, steps: int, gen: np.random.Generator):
    """Jump events ``(times, components)`` sorted in time, and the normals for every segment."""
    times, comps = [], []
    for l, lam in enumerate(driver.intensities):
        horizon = lam * t_max
        block = int(horizon + 10 * np.sqrt(horizon) + 10)
        acc = np.cumsum(gen.exponential(1.0 / lam, block))
        while acc[-1] <= t_max:
            acc = np.concatenate([acc, acc[-1] + np.cumsum(gen.exponential(1.0 / lam, block))])
        jt = acc[acc <= t_max]
        times.append(jt)
        comps.append(np.full(jt.size, l))
    if times:
        t_all = np.concatenate(times)
        c_all = np.concatenate(comps)
        order = np.argsort(t_all, kind="stable")
        t_all, c_all = t_all[order], c_all[order]
    else:
        t_all, c_all = np.zeros(0), np.zeros(0, dtype=int)
    normals = gen.standard_normal((steps + t_all.size, driver.n_brownian))
    return t_all, c_all, normals


def _integrate_batch(model: SDEModel, t_max: float, dt: float, first: int, count: int, seed: int, keep_path: bool):
    driver = model.driver
    steps = int(round(t_max / dt))
    d = model.dim_sys
    g = driver.brownian_matrix.T  # (n_b, N)
    drift = driver.drift  # (N,)
    jumps = model.jump_operators()

    noise = [_trial_noise(driver, steps * dt, steps, _rng.stream(seed, first + t, "sde")) for t in range(count)]
    # flatten per-trial events and normals; trial t owns rows offset[t]:offset[t+1]
    n_events = np.array([n[0].size for n in noise])
    ev_off = np.concatenate([[0], np.cumsum(n_events)])
    ev_time = np.concatenate([n[0] for n in noise])
    ev_comp = np.concatenate([n[1] for n in noise]).astype(np.intp)
    nz_off = np.concatenate([[0], np.cumsum(n_events + steps)])
    normals = np.concatenate([n[2] for n in noise])
    ev_step = np.minimum((ev_time / dt).astype(np.int64), steps - 1)
    trial_of_event = np.repeat(np.arange(count), n_events)
    per_step = np.zeros((count, steps), dtype=np.int64)
    np.add.at(per_step, (trial_of_event, ev_step), 1)

    u = np.empty((count, d, d), dtype=CDTYPE)
    u[:] = np.eye(d)
    path = np.empty((count, steps + 1, d, d), dtype=CDTYPE) if keep_path else None
    if keep_path:
        path[:, 0] = u
    ev_ptr = ev_off[:-1].copy()  # next event row of each trial
    nz_ptr = nz_off[:-1].copy()  # next normal row of each trial
    full = np.full(count, dt)

    for s in range(steps):
        t0 = s * dt
        n_ev = per_step[:, s]
        if not n_ev.any():
            dz = (normals[nz_ptr] * np.sqrt(dt)) @ g + dt * drift
            kernels.linear_step(u, model.a_tilde, model.b_tilde, full, dz)
            nz_ptr += 1
        else:
            seg_start = np.full(count, t0)
            for r in range(1 + int(n_ev.max())):
                active = n_ev >= r
                idx = np.flatnonzero(n_ev > r)  # trials with a jump closing this segment
                seg_end = np.full(count, t0 + dt)
                seg_end[idx] = ev_time[ev_ptr[idx] + r]
                tau = np.where(active, np.maximum(seg_end - seg_start, 0.0), 0.0)
                xi = np.where(active[:, None], normals[np.minimum(nz_ptr, normals.shape[0] - 1)], 0.0)
                dz = (xi * np.sqrt(tau)[:, None]) @ g + tau[:, None] * drift
                kernels.linear_step(u, model.a_tilde, model.b_tilde, tau, dz)
                nz_ptr += active
                if idx.size:
                    u[idx] = jumps[ev_comp[ev_ptr[idx] + r]] @ u[idx]
                seg_start = seg_end
            ev_ptr += n_ev
        if keep_path:
            path[:, s + 1] = u
    jump_times = [[n[0][n[1] == l] for l in range(driver.n_poisson)] for n in noise]
    return (path if keep_path else u[:, None]), jump_times


def integrate_sde(model: SDEModel, t_max: float, dt: float, seed: int, trial: int = 0, keep_path: bool = True) -> SDEPath:
    """One trajectory on the grid ``0, dt, ..., t_max``."""
    if not dt > 0 or not t_max > 0:
        raise ValueError("t_max and dt must be positive")
    out, jt = _integrate_batch(model, t_max, dt, trial, 1, seed, keep_path)
    steps = int(round(t_max / dt))
    times = np.arange(steps + 1) * dt if keep_path else np.array([steps * dt])
    return SDEPath(times, out[0], jt[0])


def terminal_values(
    model: SDEModel, t_max: float, dt: float, trials: int, seed: int, jobs: int = 1, chunk: int = CHUNK
) -> np.ndarray:
    """``U_{t_max}`` for every trial, shape ``(trials, d, d)``; trial ``t`` matches ``integrate_sde(..., trial=t)``."""
    if not dt > 0 or not t_max > 0:
        raise ValueError("t_max and dt must be positive")
    chunks = [(s, min(chunk, trials - s)) for s in range(0, trials, chunk)]

    def run(c):
        return _integrate_batch(model, t_max, dt, c[0], c[1], seed, False)[0][:, 0]

    if jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return np.concatenate(parts)
