import numpy as np
import pytest
from numpy.testing import assert_allclose

from qrwalk.limit import PRESETS, DriverSpec, LimitTensors, estimate_limit_tensors, preset, synthesize_driver, verify_brackets
from qrwalk.limit.driver import UNSUPPORTED, DriverSynthesisError, bracket_residuals

EXPECTED_KIND = {
    "deterministic": (1, 0),
    "dim2-diffusive": (1, 0),
    "dim2-poisson": (0, 1),
    "physical-1d": (0, 1),
    "dim3-brownian2": (2, 0),
    "dim3-mixed": (1, 1),
}


@pytest.fixture(scope="module")
def drivers():
    out = {}
    for name in PRESETS:
        m = estimate_limit_tensors(preset(name))
        out[name] = (m, synthesize_driver(m))
    return out


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_synthesised_driver_shape(drivers, name):
    m, d = drivers[name]
    assert (d.n_brownian, d.n_poisson) == EXPECTED_KIND[name]
    assert max(bracket_residuals(d, m).values()) <= 1e-8
    assert_allclose(d.intensities, 1.0, atol=1e-8)


def test_two_independent_brownian_motions(drivers):
    _, d = drivers["dim3-brownian2"]
    g = d.brownian_matrix
    # Z = G W has E[Z Z^T] = E[conj(Z) Z^T] = I per unit time: G is real orthogonal
    assert_allclose(g @ g.T, np.eye(2), atol=1e-10)
    assert_allclose(np.conj(g) @ g.T, np.eye(2), atol=1e-10)
    assert d.kind == "brownian"


def test_single_compensated_poisson(drivers):
    _, d = drivers["dim2-poisson"]
    assert d.kind == "poisson"
    assert_allclose(d.jump_vectors, [[-1.0]], atol=1e-10)
    _, d = drivers["physical-1d"]
    assert_allclose(d.jump_vectors, [[1.0]], atol=1e-10)


def test_mixed_driver(drivers):
    _, d = drivers["dim3-mixed"]
    assert d.kind == "mixed"
    assert_allclose(d.jump_vectors[:, 0], np.array([1, 1j]) / np.sqrt(2), atol=1e-10)
    g = d.brownian_matrix[:, 0]
    # Brownian part (i, 1) W / sqrt(2) up to a sign: jumps and noise each carry half of E|Z^j|^2 = t
    assert_allclose(g * np.sign(g[1].real), np.array([1j, 1]) / np.sqrt(2), atol=1e-10)


def test_unsupported_tensors():
    gen = np.random.default_rng(0)
    mk = gen.standard_normal((2, 2, 2)) + 1j * gen.standard_normal((2, 2, 2))
    with pytest.raises(DriverSynthesisError, match=UNSUPPORTED):
        synthesize_driver(LimitTensors.exact(np.eye(2), mk))
    # |M0| too large for any covariance with identity second bracket
    with pytest.raises(DriverSynthesisError, match=UNSUPPORTED):
        synthesize_driver(LimitTensors.exact([[2.0]], np.zeros((1, 1, 1))))


def test_driver_validation():
    with pytest.raises(ValueError, match="positive"):
        DriverSpec(0, 1, [0.0], [[1.0]])
    d = DriverSpec(1, 1, [2.0], [[1.0, 1.0]])
    assert_allclose(d.jump_vectors, [[1 / np.sqrt(2)]])
    assert_allclose(d.drift, [-np.sqrt(2)])


def test_single_brownian_bracket():
    d = DriverSpec(1, 0, [], [[1.0]])
    m = LimitTensors.exact([[1.0]], np.zeros((1, 1, 1)))
    rep = verify_brackets(d, m, t_max=1.0, dt=1e-3, trials=500, seed=1)
    assert rep.passed, str(rep)


def test_wrong_driver_fails_brackets():
    d = DriverSpec(1, 0, [], [[np.sqrt(2.0)]])
    m = LimitTensors.exact([[1.0]], np.zeros((1, 1, 1)))
    assert not verify_brackets(d, m, t_max=1.0, dt=1e-3, trials=500, seed=1).passed


@pytest.mark.parametrize("name", ["dim2-poisson", "dim3-mixed", "dim3-brownian2"])
def test_preset_brackets(drivers, name):
    m, d = drivers[name]
    rep = verify_brackets(d, m, t_max=1.0, dt=1e-3, trials=1000, seed=3)
    assert rep.passed, str(rep)
