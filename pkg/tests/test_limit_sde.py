import numpy as np
import pytest
from numpy.testing import assert_allclose

from qrwalk.limit import DriverSpec, SDEModel, integrate_sde, model_for, preset, terminal_values
from qrwalk.numerics import DimensionError, matrix_exponential, random_hermitian
from qrwalk.walk import complex_stderr


def deterministic_model(gen):
    ham = random_hermitian(2, gen)
    return SDEModel(-1j * ham, np.zeros((1, 2, 2)), DriverSpec(1, 0, [], [[1.0]])), ham


def piecewise_oracle(model, path):
    """Between jumps the compensated drift is deterministic; each jump multiplies by its operator."""
    c, lam = model.driver.jump_vectors, model.driver.intensities
    flow = model.a_tilde - np.einsum("jl,l,jab->ab", c, lam, model.b_tilde)
    jumps = model.jump_operators()
    events = sorted((t, l) for l, ts in enumerate(path.jump_times) for t in ts)
    u, last = np.eye(model.dim_sys, dtype=complex), 0.0
    for t, l in events:
        u = jumps[l] @ matrix_exponential(flow * (t - last)) @ u
        last = t
    return matrix_exponential(flow * (path.times[-1] - last)) @ u


def test_deterministic_ode_first_order(gen):
    model, ham = deterministic_model(gen)
    exact = matrix_exponential(-1j * ham)
    errs = [np.linalg.norm(integrate_sde(model, 1.0, dt, seed=0).terminal - exact) for dt in (1e-2, 5e-3)]
    assert errs[1] < errs[0]
    assert_allclose(errs[0] / errs[1], 2.0, rtol=0.1)


@pytest.mark.parametrize("name", ["dim2-poisson", "physical-1d"])
def test_jump_model_matches_piecewise_solution(name):
    model = model_for(preset(name))
    for trial in range(3):
        path = integrate_sde(model, 2.0, 1e-4, seed=5, trial=trial)
        assert np.linalg.norm(path.terminal - piecewise_oracle(model, path)) <= 1e-2
        assert path.unitaries.shape == (len(path.times), 2, 2)


def test_poisson_model_stays_near_unitary():
    model = model_for(preset("dim2-poisson"))
    u = terminal_values(model, 1.0, 1e-4, 200, seed=2)
    dev = np.abs(np.conj(u.transpose(0, 2, 1)) @ u - np.eye(2)).max()
    assert dev <= 1e-2


def test_mean_solves_the_drift_equation():
    model = model_for(preset("dim3-brownian2"))
    u = terminal_values(model, 1.0, 1e-3, 4000, seed=1)
    mean, se = u.mean(axis=0), complex_stderr(u)
    target = matrix_exponential(model.a_tilde)
    # Monte Carlo band plus the O(dt) Euler bias
    assert np.all(np.abs(mean - target) <= 4 * se + 5e-3)


def test_terminal_values_match_single_trials():
    model = model_for(preset("dim3-mixed"))
    batch = terminal_values(model, 0.5, 1e-3, 6, seed=4, chunk=4)
    for t in (0, 3, 5):
        assert_allclose(batch[t], integrate_sde(model, 0.5, 1e-3, seed=4, trial=t).terminal, atol=1e-12)
    threaded = terminal_values(model, 0.5, 1e-3, 6, seed=4, chunk=2, jobs=3)
    assert_allclose(threaded, batch, atol=1e-12)


def test_model_validation(gen):
    model, _ = deterministic_model(gen)
    with pytest.raises(DimensionError):
        SDEModel(np.zeros((2, 2)), np.zeros((2, 2, 2)), model.driver)
    with pytest.raises(ValueError, match="positive"):
        integrate_sde(model, 1.0, 0.0, seed=0)
