import math

import numpy as np
import pytest
from scipy import stats

from spegarch.core import MODEL_A, InitialConditions, ModelParams, WeightMatrix, make_rng
from spegarch.inversion import InversionError
from spegarch.likelihood import (
    FitOptions,
    fit_qmle,
    log_likelihood,
    numerical_hessian,
    std_errors_from_hessian,
)
from spegarch.mc import lattice_weights
from spegarch.process import check_stationarity, simulate

from oracles import fd_jacobian, observation_map, scalar_egarch_loglik

OFF = ModelParams(0.0, 0.0, 0.0, 0.0, 0.0, 0.4)


def test_dynamics_off_is_gaussian(lattice4):
    y = simulate(OFF, *lattice4, 30, seed=2).y.values
    ref = stats.norm.logpdf(y[:, 5:]).sum()
    assert log_likelihood(OFF, y, *lattice4) == pytest.approx(ref, rel=1e-13)


def test_univariate_oracle():
    z = WeightMatrix(np.zeros((1, 1)))
    rng = make_rng(17)
    for _ in range(5):
        p = ModelParams(rng.uniform(-1, 1), 0.0, rng.uniform(-0.5, 0.5), 0.0, rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9))
        y = simulate(p, z, z, 60, seed=int(rng.integers(1 << 30))).y.values
        ref = scalar_egarch_loglik(y[0], p.alpha, p.rho1, p.lambda1, p.theta)
        assert log_likelihood(p, y, z, z) == pytest.approx(ref, abs=1e-10, rel=1e-12)


def test_jacobian_term_matches_fd(lattice9):
    # a single retained period isolates -ln|det dY_t/d eps_t|
    w1, w2 = (w.entries for w in lattice9)
    s = simulate(MODEL_A, *lattice9, 8, burn_in=0, seed=4)
    e, lh = s.eps.values, s.log_h.values
    ll = log_likelihood(MODEL_A, s.y, *lattice9, burn=7)
    f = lambda x: observation_map(x, MODEL_A, w1, w2, e[:, 6], lh[:, 6])
    logdet = math.log(abs(np.linalg.det(fd_jacobian(f, e[:, 7]))))
    ref = -4.5 * math.log(2 * math.pi) - 0.5 * float(e[:, 7] @ e[:, 7]) - logdet
    assert ll == pytest.approx(ref, rel=1e-8)


def test_relabeling_invariance(lattice9):
    w1, w2 = (w.entries for w in lattice9)
    s = simulate(MODEL_A, *lattice9, 30, seed=5)
    perm = make_rng(1).permutation(9)
    ix = np.ix_(perm, perm)
    init = InitialConditions(np.linspace(0.1, 0.9, 9), np.linspace(-1, 1, 9) + 0.05)
    init_p = InitialConditions(init.y0[perm], init.eps0[perm])
    a = log_likelihood(MODEL_A, s.y.values, w1, w2, init)
    b = log_likelihood(MODEL_A, s.y.values[perm], w1[ix], w2[ix], init_p)
    assert a == pytest.approx(b, rel=1e-12)


def test_truth_dominates_large_t(lattice4):
    s = simulate(MODEL_A, *lattice4, 2000, seed=6)
    base = log_likelihood(MODEL_A, s.y, *lattice4)
    rng = make_rng(2)
    wins = 0
    for _ in range(20):
        x = MODEL_A.free_vector() + rng.normal(0, 0.1, 6)
        p = ModelParams.from_free_vector(x)
        try:
            wins += base >= log_likelihood(p, s.y, *lattice4)
        except InversionError:
            wins += 1
    assert wins > 10


def test_quadratic_hessian_se():
    sigma = np.array([0.5, 2.0, 3.0])
    f = lambda x: 0.5 * np.sum((x / sigma) ** 2)  # negative log-likelihood
    res = std_errors_from_hessian(numerical_hessian(f, np.zeros(3)))
    assert res.ok and np.allclose(res.std_errors, sigma, rtol=1e-6)


def test_singular_hessian_regularised():
    res = std_errors_from_hessian(np.diag([1.0, 0.0]))
    assert res.ridge > 0 and np.all(np.isfinite(res.std_errors))


@pytest.fixture(scope="module")
def small_data():
    w1, w2 = lattice_weights(2, 2)
    return simulate(MODEL_A, w1, w2, 60, seed=3).y, w1, w2


def test_fit_deterministic(small_data):
    y, w1, w2 = small_data
    opts = FitOptions(n_starts=4, n_local=1, seed=9)
    a = fit_qmle(y, w1, w2, opts=opts)
    b = fit_qmle(y, w1, w2, opts=opts)
    assert a.to_dict() == b.to_dict()
    assert a.n_obs == 4 * 55 and a.burn_dropped == 5
    assert a.aic == pytest.approx(-2 * a.loglik + 12)
    assert a.bic == pytest.approx(-2 * a.loglik + 6 * math.log(220))


def test_fit_stationary_and_improves(small_data):
    y, w1, w2 = small_data
    for seed in range(3):
        r = fit_qmle(y, w1, w2, opts=FitOptions(n_starts=4, n_local=1, seed=seed, compute_se=False))
        assert check_stationarity(r.params, w2).strict_ok
        assert abs(r.params.theta) < 1
        assert r.loglik >= log_likelihood(MODEL_A, y, w1, w2) - 1e-6


def test_fit_two_theta(small_data):
    y, w1, w2 = small_data
    r = fit_qmle(y, w1, w2, opts=FitOptions(n_starts=4, n_local=1, two_theta=True, compute_se=False), start=MODEL_A)
    assert r.params.two_theta and len(r.names) == 7


def test_se_shrink_with_t(lattice4):
    se = []
    for t_len in (100, 400):
        y = simulate(MODEL_A, *lattice4, t_len, seed=21).y
        r = fit_qmle(y, *lattice4, opts=FitOptions(n_starts=4, n_local=1), start=MODEL_A)
        assert r.std_errors is not None
        se.append(r.std_errors)
    assert np.median(se[1] / se[0]) < 0.8


@pytest.mark.slow
def test_se_coverage(lattice4):
    covered = []
    for r in range(50):
        y = simulate(MODEL_A, *lattice4, 300, seed=500 + r).y
        fit = fit_qmle(y, *lattice4, opts=FitOptions(n_starts=2, n_local=1, seed=r), start=MODEL_A)
        if fit.std_errors is None:
            continue
        covered.append(np.abs(fit.params.free_vector() - MODEL_A.free_vector()) <= 2 * fit.std_errors)
    assert np.mean(covered) >= 0.8
