"""Families ``h -> U(h)`` of classical unitaries and the named presets.

Each preset builds its branch unitaries from operators drawn once from a seed
(independent of ``h``), so every member of a family shares the same
generators.  Diffusive branches use ``U_i = exp(sqrt(h) O_i + h Q_i)`` with
``O_i, Q_i`` anti-Hermitian, which expands as ``I + sqrt(h) O_i + h P_i + o(h)``
with ``P_i = Q_i + O_i^2 / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import rng as _rng
from ..channel import ClassicalUnitary, build_classical_unitary
from ..numerics import CDTYPE, matrix_exponential, random_antihermitian, random_hermitian, random_unitary


@dataclass(frozen=True, eq=False)
class HFamily:
    """``builder(h)`` is the interaction at step size ``h``.

    ``a_tilde`` / ``b_tilde`` hold the limit drift and noise operators when
    they are known in closed form.
    """

    name: str
    builder: Callable[[float], ClassicalUnitary]
    params: dict = field(default_factory=dict)
    a_tilde: np.ndarray | None = None
    b_tilde: np.ndarray | None = None
    jump_outcome: int | None = None  # index of the rare outcome for Poisson-type families
    operators: dict = field(default_factory=dict)  # generators the family was built from

    def __call__(self, h: float) -> ClassicalUnitary:
        if not h > 0:
            raise ValueError("step size h must be positive")
        return self.builder(float(h))

    @property
    def dim_sys(self) -> int:
        return self.a_tilde.shape[0] if self.a_tilde is not None else self(0.01).dim_sys


def _diffusive(o: np.ndarray, q: np.ndarray, h: float) -> np.ndarray:
    return matrix_exponential(np.sqrt(h) * o + h * q)


def _phis_from_values(values: np.ndarray, p: np.ndarray) -> np.ndarray:
    """``phi_i = sqrt(p_i) (1, conj(v_i))``."""
    ones = np.ones((len(p), 1), dtype=CDTYPE)
    return np.sqrt(p)[:, None] * np.hstack([ones, np.conj(values)])


def dim2_diffusive(
    p: float = 0.5, tau: float = 0.0, dim_sys: int = 2, seed: int = 0, o_scale: float = 1.0, q_scale: float = 1.0
) -> HFamily:
    """Two-outcome walk with fixed law ``(p, 1-p)`` and ``p O_1 + q O_2 = 0``."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    q = 1.0 - p
    gen = _rng.instance_rng(seed)
    o1 = random_antihermitian(dim_sys, gen, o_scale)
    o2 = -(p / q) * o1
    q1 = random_antihermitian(dim_sys, gen, q_scale)
    q2 = random_antihermitian(dim_sys, gen, q_scale)
    phase = np.exp(1j * tau)
    phis = np.array([[np.sqrt(p) * phase, np.sqrt(q)], [-np.sqrt(q) * phase, np.sqrt(p)]])

    def build(h):
        return build_classical_unitary([(phis[0], _diffusive(o1, q1, h)), (phis[1], _diffusive(o2, q2, h))])

    p1, p2 = q1 + o1 @ o1 / 2, q2 + o2 @ o2 / 2
    a_t = p * p1 + q * p2
    b_t = (np.sqrt(p * q) * np.conj(phase) * (o1 - o2))[None]
    params = dict(p=p, tau=tau, dim_sys=dim_sys, seed=seed, o_scale=o_scale, q_scale=q_scale)
    return HFamily("dim2-diffusive", build, params, a_t, b_t)


def dim2_poisson(dim_sys: int = 2, seed: int = 0, scale: float = 1.0) -> HFamily:
    """``U_1 = exp(-ihH)`` with probability ``1/(1+h)``, a fixed ``W`` otherwise."""
    gen = _rng.instance_rng(seed)
    ham = random_hermitian(dim_sys, gen, scale)
    w = random_unitary(dim_sys, gen)
    gen_v = -1j * ham

    def build(h):
        s = np.sqrt(h)
        phis = np.array([[1.0, s], [-s, 1.0]]) / np.sqrt(1 + h)
        return build_classical_unitary([(phis[0], matrix_exponential(h * gen_v)), (phis[1], w)])

    eye = np.eye(dim_sys)
    params = dict(dim_sys=dim_sys, seed=seed, scale=scale)
    return HFamily("dim2-poisson", build, params, gen_v + w - eye, (eye - w)[None], jump_outcome=1)


def physical_1d(dim_sys: int = 2, seed: int = 0, scale: float = 1.0) -> HFamily:
    """System Hamiltonian ``H_S`` plus an interaction ``V`` that acts at rare kicks."""
    gen = _rng.instance_rng(seed)
    h_s = random_hermitian(dim_sys, gen, scale)
    v = random_hermitian(dim_sys, gen, scale)
    kick = matrix_exponential(-1j * v)

    def build(h):
        s = np.sqrt(h)
        phis = np.array([[1.0, -s], [s, 1.0]]) / np.sqrt(1 + h)
        u1 = matrix_exponential(-1j * h * (h_s - v))
        u2 = matrix_exponential(-1j * (h * h_s + v))
        return build_classical_unitary([(phis[0], u1), (phis[1], u2)])

    eye = np.eye(dim_sys)
    a_t = -1j * h_s + 1j * v + kick - eye
    params = dict(dim_sys=dim_sys, seed=seed, scale=scale)
    ops = dict(h_s=h_s, v=v)
    return HFamily("physical-1d", build, params, a_t, (kick - eye)[None], jump_outcome=1, operators=ops)


DIM3_VALUES = np.array([[1, 0], [-1, 1], [-1, -2]], dtype=CDTYPE)
DIM3_PROBS = np.array([1 / 2, 1 / 3, 1 / 6])


def dim3_brownian2(dim_sys: int = 2, seed: int = 0, o_scale: float = 1.0, q_scale: float = 1.0) -> HFamily:
    """Three fixed outcomes in C^2 driving two independent Brownian motions."""
    gen = _rng.instance_rng(seed)
    o1 = random_antihermitian(dim_sys, gen, o_scale)
    o2 = random_antihermitian(dim_sys, gen, o_scale)
    o = np.array([o1, o2, -3 * o1 - 2 * o2])  # sum_i p_i O_i = 0
    q = np.array([random_antihermitian(dim_sys, gen, q_scale) for _ in range(3)])
    phis = _phis_from_values(DIM3_VALUES, DIM3_PROBS)

    def build(h):
        return build_classical_unitary([(phis[i], _diffusive(o[i], q[i], h)) for i in range(3)])

    pmats = q + o @ o / 2
    a_t = np.tensordot(DIM3_PROBS, pmats, axes=1)
    b_t = np.einsum("i,ij,iab->jab", DIM3_PROBS, np.conj(DIM3_VALUES), o)
    params = dict(dim_sys=dim_sys, seed=seed, o_scale=o_scale, q_scale=q_scale)
    return HFamily("dim3-brownian2", build, params, a_t, b_t, operators=dict(o=o, q=q))


def dim3_mixed_values(h: float) -> tuple[np.ndarray, np.ndarray]:
    s = np.sqrt(h)
    v = np.array(
        [
            [1j / np.sqrt(2), 1 / np.sqrt(2)],
            [(1 - 1j * s) / np.sqrt(2 * h), (1j - s) / np.sqrt(2 * h)],
            [(-2 * s - 1j) / np.sqrt(2), (-1 - 2j * s) / np.sqrt(2)],
        ]
    )
    p = np.array([0.5, h / (1 + 2 * h), 1 / (2 + 4 * h)])
    return v, p


def dim3_mixed(dim_sys: int = 2, seed: int = 0, o_scale: float = 1.0, q_scale: float = 1.0) -> HFamily:
    """Three outcomes in C^2 whose limit mixes one Poisson process and one Brownian motion."""
    gen = _rng.instance_rng(seed)
    o1 = random_antihermitian(dim_sys, gen, o_scale)
    o3 = -o1
    q1 = random_antihermitian(dim_sys, gen, q_scale)
    q3 = random_antihermitian(dim_sys, gen, q_scale)
    u2 = random_unitary(dim_sys, gen)

    def build(h):
        v, p = dim3_mixed_values(h)
        phis = _phis_from_values(v, p)
        return build_classical_unitary(
            [(phis[0], _diffusive(o1, q1, h)), (phis[1], u2), (phis[2], _diffusive(o3, q3, h))]
        )

    eye = np.eye(dim_sys)
    p1, p3 = q1 + o1 @ o1 / 2, q3 + o3 @ o3 / 2
    r2 = np.sqrt(2)
    a_t = (p1 + p3) / 2 + u2 - eye
    b1 = -1j / (2 * r2) * o1 + (u2 - eye) / r2 + 1j / (2 * r2) * o3
    b2 = o1 / (2 * r2) - 1j * (u2 - eye) / r2 - o3 / (2 * r2)
    params = dict(dim_sys=dim_sys, seed=seed, o_scale=o_scale, q_scale=q_scale)
    return HFamily("dim3-mixed", build, params, a_t, np.array([b1, b2]), jump_outcome=1)


def deterministic(dim_sys: int = 2, seed: int = 0, scale: float = 1.0) -> HFamily:
    """Both branches equal ``exp(-ihH)``: no randomness, limit ``dU = -iH U dt``."""
    gen = _rng.instance_rng(seed)
    ham = random_hermitian(dim_sys, gen, scale)
    phis = np.array([[1.0, 1.0], [-1.0, 1.0]]) / np.sqrt(2)

    def build(h):
        u = matrix_exponential(-1j * h * ham)
        return build_classical_unitary([(phis[0], u), (phis[1], u)])

    params = dict(dim_sys=dim_sys, seed=seed, scale=scale)
    return HFamily("deterministic", build, params, -1j * ham, np.zeros((1, dim_sys, dim_sys), dtype=CDTYPE))


PRESETS: dict[str, Callable[..., HFamily]] = {
    "dim2-diffusive": dim2_diffusive,
    "dim2-poisson": dim2_poisson,
    "physical-1d": physical_1d,
    "dim3-brownian2": dim3_brownian2,
    "dim3-mixed": dim3_mixed,
    "deterministic": deterministic,
}
ALIASES = {"dim2-example": "dim2-diffusive"}


def preset(name: str, **params) -> HFamily:
    key = ALIASES.get(name, name)
    if key not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS) + sorted(ALIASES)}")
    return PRESETS[key](**params)
