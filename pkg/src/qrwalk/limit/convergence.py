"""Weak-convergence comparison of the discrete walk against the limit SDE."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.stats

from ..numerics import dagger
from ..walk import complex_stderr, first_occurrence_steps, terminal_unitaries
from .family import HFamily
from .sde import SDEModel, terminal_values


@dataclass(frozen=True)
class Observable:
    """A complex test function evaluated on a batch of matrices ``(T, d, d) -> (T,)``."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]


def entry_observables(d: int) -> list[Observable]:
    """Real and imaginary part of every matrix entry (1-based names)."""
    out = []
    for a in range(d):
        for b in range(d):
            out.append(Observable(f"re V[{a + 1},{b + 1}]", lambda v, a=a, b=b: v[:, a, b].real))
            out.append(Observable(f"im V[{a + 1},{b + 1}]", lambda v, a=a, b=b: v[:, a, b].imag))
    return out


def probe_observable(probe: np.ndarray, name: str = "tr(M V P0 V*)") -> Observable:
    """``tr(M V |e_0><e_0| V^*)``, the expectation of ``M`` in the evolved first basis state."""

    def fn(v):
        col = v[:, :, 0]
        return np.real(np.einsum("ta,ab,tb->t", np.conj(col), probe, col))

    return Observable(name, fn)


def default_observables(d: int, seed: int = 0) -> list[Observable]:
    gen = np.random.default_rng(seed)
    x = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
    return entry_observables(d) + [probe_observable((x + dagger(x)) / 2)]


@dataclass
class ConvergenceRow:
    h: float
    observable: str
    discrete_mean: float
    sde_mean: float
    abs_error: float
    stderr: float  # combined standard error of the difference


@dataclass
class KSResult:
    h: float
    trials: int
    statistic: float
    pvalue: float


@dataclass
class ConvergenceReport:
    t: float
    hs: np.ndarray
    rows: list[ConvergenceRow]
    errors: np.ndarray  # per h, the largest error over the entry observables
    sigmas: np.ndarray  # standard error attached to that largest error
    band: float
    ks: KSResult | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def decrements(self) -> np.ndarray:
        return self.errors[:-1] - self.errors[1:]

    @property
    def thresholds(self) -> np.ndarray:
        return self.band * np.sqrt(self.sigmas[:-1] ** 2 + self.sigmas[1:] ** 2)

    @property
    def trend_ok(self) -> bool:
        """Every refinement lowers the error by more than ``band`` combined standard errors."""
        return bool(np.all(self.decrements > self.thresholds))

    @property
    def orders(self) -> np.ndarray:
        """Empirical orders ``log(err_k / err_{k+1}) / log(h_k / h_{k+1})``."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(self.errors[:-1] / self.errors[1:]) / np.log(self.hs[:-1] / self.hs[1:])


def evaluate(observables: Sequence[Observable], v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals = np.stack([np.asarray(o.fn(v), dtype=float) for o in observables], axis=1)
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(vals.shape[0])
    return mean, se


def first_jump_ks(fam: HFamily, h: float, trials: int, seed: int) -> KSResult:
    """KS distance between ``h`` times the first rare-outcome step and Exp(1)."""
    if fam.jump_outcome is None:
        raise ValueError(f"family {fam.name!r} has no rare outcome")
    steps = first_occurrence_steps(fam(h), fam.jump_outcome, trials, seed)
    res = scipy.stats.kstest(steps * h, "expon")
    return KSResult(h, trials, float(res.statistic), float(res.pvalue))


def weak_convergence_study(
    fam: HFamily,
    model: SDEModel,
    t: float,
    hs: Sequence[float],
    trials: int,
    observables: Sequence[Observable] | None = None,
    seed: int = 0,
    sde_dt: float = 1e-3,
    sde_trials: int | None = None,
    band: float = 2.0,
    jobs: int = 1,
    ks_h: float | None = None,
) -> ConvergenceReport:
    """Compare ``E f(V_{floor(t/h)})`` with ``E f(U_t)`` for each ``h``.

    The SDE reference is one Euler-Maruyama ensemble at step ``sde_dt``; the
    walk at step ``h`` uses stream seeds offset by the level so levels are
    independent.  The trend statistic is the largest absolute error over the
    real and imaginary parts of the matrix entries.
    """
    hs = np.asarray(hs, dtype=float)
    if np.any(np.diff(hs) >= 0):
        raise ValueError("hs must be strictly decreasing")
    d = model.dim_sys
    obs = list(observables) if observables is not None else default_observables(d, seed)
    n_entry = sum(1 for o in obs if o.name.startswith(("re V[", "im V[")))
    sde = terminal_values(model, t, sde_dt, sde_trials or trials, seed, jobs)
    sde_mean, sde_se = evaluate(obs, sde)
    rows, errors, sigmas = [], [], []
    for level, h in enumerate(hs):
        steps = int(np.floor(t / h + 1e-9))
        v = terminal_unitaries(fam(h), steps, trials, seed + 1 + level, jobs)
        mean, se = evaluate(obs, v)
        err = np.abs(mean - sde_mean)
        sig = np.sqrt(se**2 + sde_se**2)
        for o, m_d, m_s, e, s in zip(obs, mean, sde_mean, err, sig):
            rows.append(ConvergenceRow(float(h), o.name, float(m_d), float(m_s), float(e), float(s)))
        scope = slice(0, n_entry) if n_entry else slice(None)
        k = int(np.argmax(err[scope]))
        errors.append(err[scope][k])
        sigmas.append(sig[scope][k])
    ks = None
    if fam.jump_outcome is not None:
        ks = first_jump_ks(fam, ks_h if ks_h is not None else float(hs[-1]), trials, seed)
    return ConvergenceReport(t, hs, rows, np.array(errors), np.array(sigmas), band, ks)
