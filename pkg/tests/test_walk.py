import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from qrwalk.channel import branches_from_obtuse, build_classical_unitary, channel_from_unitary, random_classical_unitary
from qrwalk.limit.family import dim2_poisson
from qrwalk.numerics import DimensionError, random_density, random_unitary
from qrwalk.obtuse import validate_obtuse
from qrwalk.walk import (
    ampliated_operator,
    channel_power,
    first_occurrence_steps,
    full_tensor_evolution,
    martingale_residual,
    monte_carlo_channel,
    outcome_law_pvalue,
    simulate_walk,
    terminal_unitaries,
)


def two_level(gen, p=0.3, tau=0.4):
    q = 1 - p
    phi = np.array([np.sqrt(p) * np.exp(1j * tau), np.sqrt(q)])
    psi = np.array([-np.sqrt(q) * np.exp(1j * tau), np.sqrt(p)])
    return build_classical_unitary([(phi, random_unitary(2, gen)), (psi, random_unitary(2, gen))])


def three_point(gen):
    s = validate_obtuse([(1, 0), (-1, 1), (-1, -2)])
    return build_classical_unitary(branches_from_obtuse(s, [random_unitary(2, gen) for _ in range(3)]))


def constant(gen, d=2, k=2):
    v = random_unitary(d, gen)
    return build_classical_unitary([(phi, v) for phi in random_unitary(k, gen).T]), v


def test_zero_steps(gen):
    traj = simulate_walk(two_level(gen), 0, seed=1)
    assert traj.unitaries.shape == (1, 2, 2)
    assert_allclose(traj.terminal, np.eye(2))
    rho = random_density(2, gen)
    mean, se = monte_carlo_channel(two_level(gen), rho, 0, 10, 1)
    assert np.array_equal(mean, rho)
    assert not se.any()


def test_path_follows_outcomes(gen):
    u = three_point(gen)
    traj = simulate_walk(u, 40, seed=3, trial=2)
    assert traj.all_unitary()
    for k, i in enumerate(traj.outcome_indices):
        assert_allclose(traj.unitaries[k + 1], u.unitaries[i] @ traj.unitaries[k], atol=1e-13)
    short = simulate_walk(u, 40, seed=3, trial=2, keep_path=False)
    assert_allclose(short.terminal, traj.terminal, atol=1e-12)
    batch = terminal_unitaries(u, 40, 4, seed=3)
    assert_allclose(batch[2], traj.terminal, atol=1e-12)


def test_equal_branches_give_powers(gen):
    u, v = constant(gen)
    traj = simulate_walk(u, 6, seed=0)
    for k in range(7):
        assert_allclose(traj.unitaries[k], np.linalg.matrix_power(v, k), atol=1e-12)
    rho = random_density(2, gen)
    mean, se = monte_carlo_channel(u, rho, 5, 50, 0)
    v5 = np.linalg.matrix_power(v, 5)
    assert_allclose(mean, v5 @ rho @ v5.conj().T, atol=1e-12)
    assert se.max() <= 1e-12


def test_unitarity_over_long_walks(gen):
    u = random_classical_unitary(3, 4, gen)
    for t in range(3):
        assert simulate_walk(u, 500, seed=11, trial=t).all_unitary(1e-9)


def test_first_rare_outcome_is_geometric():
    h = 0.01
    u = dim2_poisson(seed=0)(h)
    steps = first_occurrence_steps(u, 1, 4000, seed=7)
    success = h / (1 + h)
    # binned chi-square against the geometric law
    edges = np.unique(np.quantile(steps, np.linspace(0, 1, 21)).astype(int))
    edges[-1] = steps.max() + 1
    observed, _ = np.histogram(steps, bins=edges)
    cdf = scipy.stats.geom.cdf(edges - 1, success)
    expected = np.diff(cdf)
    expected = expected / expected.sum() * len(steps)
    assert scipy.stats.chisquare(observed, expected).pvalue > 0.01
    # consistent with the outcome stream used by the walk itself
    traj = simulate_walk(u, int(steps[0]), seed=7, trial=0)
    assert traj.outcome_indices[-1] == 1
    assert np.all(traj.outcome_indices[:-1] == 0)


def test_monte_carlo_matches_channel_iteration(gen):
    u = two_level(gen)
    rho = random_density(2, gen)
    mean, se = monte_carlo_channel(u, rho, 5, 10**4, seed=4)
    exact = channel_power(u, rho, 5)
    assert np.linalg.norm(mean - exact) <= 4 * se.max()
    assert_allclose(np.trace(mean), 1.0, atol=1e-12)


def test_full_tensor_evolution(gen):
    u = two_level(gen)
    rho = random_density(2, gen)
    omega = np.diag([1.0, 0.0]).astype(complex)
    one = channel_from_unitary(u.u_total, omega, 2, 2)(rho)
    assert_allclose(full_tensor_evolution(u, 1, rho), one, atol=1e-12)
    assert_allclose(full_tensor_evolution(u, 3, rho), channel_power(u, rho, 3), atol=1e-10)
    u3 = three_point(gen)
    assert_allclose(full_tensor_evolution(u3, 2, rho), channel_power(u3, rho, 2), atol=1e-10)


def test_ampliated_operator_is_unitary_and_agrees(gen):
    u = three_point(gen)
    rho = random_density(2, gen)
    v = ampliated_operator(u, 2)
    assert_allclose(v @ v.conj().T, np.eye(18), atol=1e-12)
    chain = np.zeros((9, 9), dtype=complex)
    chain[0, 0] = 1
    big = v @ np.kron(rho, chain) @ v.conj().T
    reduced = np.einsum("asbs->ab", big.reshape(2, 9, 2, 9))
    assert_allclose(reduced, full_tensor_evolution(u, 2, rho), atol=1e-12)


def test_tensor_budget(gen):
    u = three_point(gen)
    with pytest.raises(DimensionError, match="budget"):
        full_tensor_evolution(u, 8, np.eye(2) / 2)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_martingale_property(seed):
    gen = np.random.default_rng(seed)
    u = random_classical_unitary(2, 3, gen)
    traj = simulate_walk(u, 5, seed=seed % 1000)
    for v in traj.unitaries:
        assert martingale_residual(u, v) <= 1e-10


@pytest.mark.parametrize("steps", [1, 2, 3, 4])
def test_outcome_law(gen, steps):
    assert outcome_law_pvalue(three_point(gen), steps, 20000, seed=steps) > 0.01


def test_trials_are_order_independent(gen):
    u = three_point(gen)
    a = terminal_unitaries(u, 30, 5000, seed=2, jobs=1)
    b = terminal_unitaries(u, 30, 5000, seed=2, jobs=3)
    assert np.array_equal(a, b)
