import numpy as np
import pytest
from numpy.testing import assert_allclose

from qrwalk.limit import first_jump_ks, model_for, preset, weak_convergence_study
from qrwalk.limit.convergence import entry_observables, evaluate, probe_observable


def test_observables_on_known_matrices():
    v = np.array([[[0, 1j], [1, 0]]] * 3)
    mean, se = evaluate(entry_observables(2), v)
    assert_allclose(mean, [0, 0, 0, 1, 1, 0, 0, 0])
    assert_allclose(se, 0)
    probe = np.diag([2.0, -1.0])
    # V e_0 = e_1, so the expectation picks the second diagonal entry
    assert_allclose(probe_observable(probe).fn(v), -1.0)


def test_deterministic_family_error_is_discretisation_only():
    fam = preset("deterministic")
    rep = weak_convergence_study(fam, model_for(fam), 1.0, [0.1, 0.05, 0.025], trials=20, sde_dt=1e-4)
    assert np.all(rep.sigmas <= 1e-12)  # no randomness on either side
    # the walk is exact at t = n h, so only the Euler error of the reference remains
    assert_allclose(rep.errors, rep.errors[0], rtol=1e-6)
    assert rep.errors[0] <= 1e-4
    coarse = weak_convergence_study(fam, model_for(fam), 1.0, [0.1, 0.05, 0.025], trials=20, sde_dt=1e-3)
    assert_allclose(coarse.errors[0] / rep.errors[0], 10, rtol=0.05)
    assert rep.ks is None


def test_study_rejects_unsorted_steps():
    fam = preset("deterministic")
    with pytest.raises(ValueError, match="decreasing"):
        weak_convergence_study(fam, model_for(fam), 1.0, [0.01, 0.1], trials=10)


def test_report_rows_and_orders():
    fam = preset("dim2-poisson")
    rep = weak_convergence_study(fam, model_for(fam), 0.5, [0.05, 0.0125], trials=2000, sde_dt=1e-3, seed=3)
    n_obs = len(rep.rows) // 2
    assert n_obs == 9  # 8 entry observables and one probe
    assert {r.h for r in rep.rows} == {0.05, 0.0125}
    assert rep.orders.shape == (1,)
    assert rep.ks is not None and rep.ks.h == 0.0125


def test_first_jump_time_is_nearly_exponential():
    ks = first_jump_ks(preset("dim2-poisson"), 1e-2, 4000, seed=1)
    assert ks.statistic <= 0.03
    with pytest.raises(ValueError, match="rare outcome"):
        first_jump_ks(preset("deterministic"), 1e-2, 10, seed=1)
