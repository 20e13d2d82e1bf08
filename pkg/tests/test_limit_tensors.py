import numpy as np
import pytest
from numpy.testing import assert_allclose

from qrwalk.limit import PRESETS, LimitTensors, estimate_limit_tensors, preset
from qrwalk.limit.family import HFamily, dim2_diffusive, dim3_mixed_values
from qrwalk.limit.tensors import neville, tensor_sequences
from qrwalk.numerics import is_unitary


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_build_valid_members(name):
    fam = preset(name)
    for h in (0.1, 0.01, 0.001):
        u = fam(h)
        assert u.decomposition.residual <= 1e-9
        assert is_unitary(u.u_total)
    # members converge to the identity on H at the rate sqrt(h)
    a = fam(1e-6).a
    assert np.linalg.norm(a - np.eye(fam.dim_sys)) <= 1e-2


def test_alias_and_unknown_preset():
    assert preset("dim2-example").name == "dim2-diffusive"
    with pytest.raises(KeyError, match="unknown preset"):
        preset("nope")
    with pytest.raises(ValueError, match="positive"):
        preset("deterministic")(0.0)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_canonical_operators_approach_the_limit(name):
    """(A - I)/h -> A~ and B/sqrt(h) -> B~ with error O(sqrt(h))."""
    fam = preset(name)
    eye = np.eye(fam.dim_sys)
    errs = []
    for h in (1e-3, 1e-5):
        u = fam(h)
        errs.append(max(np.abs((u.a - eye) / h - fam.a_tilde).max(), np.abs(u.b / np.sqrt(h) - fam.b_tilde).max()))
    assert errs[1] <= 0.2 * errs[0] + 1e-9
    assert errs[1] <= 0.05


def test_neville_recovers_polynomials():
    xs = np.array([0.4, 0.2, 0.1, 0.05])
    ys = 3.0 - 2.0 * xs + (0.5 + 1j) * xs**2
    est, err, flag = neville(xs, ys)
    assert_allclose(est, 3.0, atol=1e-12)
    assert err <= 1e-12
    assert not flag


def test_neville_flags_divergent_sequences():
    xs = np.array([0.4, 0.2, 0.1, 0.05])
    # corrections are 0, 0, then 1/21: the coarsest point disagrees with the rest
    _, err, flag = neville(xs, np.array([1.0, 0.0, 0.0, 0.0]))
    assert flag


@pytest.mark.parametrize("tau", [0.0, 0.6])
def test_two_point_diffusive_family(tau):
    m = estimate_limit_tensors(dim2_diffusive(p=0.3, tau=tau))
    assert_allclose(m.m0, [[np.exp(2j * tau)]], atol=1e-10)
    assert_allclose(m.mk, 0, atol=1e-10)
    assert not m.any_flagged


@pytest.mark.parametrize("name, sign", [("dim2-poisson", -1), ("physical-1d", 1)])
def test_rare_outcome_families(name, sign):
    fam = preset(name)
    # closed forms: S^{11}_0 = 1 and sqrt(h) S^{11}_1 = sign (1 - h)
    hs = np.array([0.1, 0.01])
    s0, sk = tensor_sequences(fam, hs)
    assert_allclose(s0.ravel(), 1, atol=1e-12)
    assert_allclose(sk.ravel(), sign * (1 - hs), atol=1e-12)
    m = estimate_limit_tensors(fam)
    assert_allclose(m.mk.ravel(), [sign], atol=1e-10)


def test_h_independent_values_have_no_jump_tensor():
    m = estimate_limit_tensors(preset("dim3-brownian2"))
    assert_allclose(m.m0, np.eye(2), atol=1e-12)  # S^{ij}_0 of the three-point system
    assert_allclose(m.mk, 0, atol=1e-10)


def test_mixed_family_tensors():
    m = estimate_limit_tensors(preset("dim3-mixed"))
    c = np.array([1, 1j]) / np.sqrt(2)
    assert_allclose(m.mk, np.einsum("i,j,k->ijk", c, c, np.conj(c)), atol=1e-9)
    assert_allclose(m.m0, [[0, 1j], [1j, 0]], atol=1e-9)
    v, p = dim3_mixed_values(0.01)
    assert_allclose(p.sum(), 1, atol=1e-14)


def test_probe_validation():
    fam = preset("deterministic")
    with pytest.raises(ValueError, match="at least 3"):
        estimate_limit_tensors(fam, [0.1, 0.01])
    with pytest.raises(ValueError, match="decreasing"):
        estimate_limit_tensors(fam, [0.01, 0.1, 0.001])


def test_exact_tensors():
    m = LimitTensors.exact(np.eye(2), np.zeros((2, 2, 2)))
    assert m.n == 2
    assert m.max_error == 0
    assert not m.any_flagged


def test_family_dim_without_closed_form():
    fam = preset("deterministic", dim_sys=3)
    bare = HFamily("bare", fam.builder)
    assert bare.dim_sys == 3
