import numpy as np
import pytest

from spegarch.core import Panel
from spegarch.mc import lattice_weights
from spegarch.meanmodel import GRID_STEP, RHO_BOUND, fit_sdpd, sdpd_profile_loglik, simulate_sdpd

W1, W2 = lattice_weights(4, 4)


@pytest.mark.parametrize("truth", [(0.0, 0.0, 0.0), (0.3, 0.2, 0.1)])
def test_recovery(truth):
    y = simulate_sdpd(*truth, W1, W2, 1000, seed=4)
    fit = fit_sdpd(y, W1, W2)
    assert np.allclose([fit.rho, fit.gamma, fit.lam], truth, atol=0.05)
    assert fit.sigma2 == pytest.approx(1.0, abs=0.05)


def test_whitening():
    y = simulate_sdpd(0.3, 0.2, 0.1, W1, W2, 1000, seed=5)
    u = fit_sdpd(y, W1, W2).residuals.values
    u = u - u.mean(axis=1, keepdims=True)
    r1 = np.sum(u[:, 1:] * u[:, :-1]) / np.sum(u * u)
    assert abs(r1) < 0.05


def test_reconstruction_identity():
    y = simulate_sdpd(0.2, 0.4, -0.1, W1, W2, 120, seed=6)
    fit = fit_sdpd(y, W1, W2)
    v, a, b = y.values, W1.entries, W2.entries
    ref = v[:, 1:] - fit.rho * a @ v[:, 1:] - fit.gamma * v[:, :-1] - fit.lam * b @ v[:, :-1]
    assert np.allclose(fit.residuals.values, ref, atol=1e-12)


def test_grid_argmax():
    y = simulate_sdpd(-0.4, 0.1, 0.3, W1, W2, 80, seed=7)
    fit = fit_sdpd(y, W1, W2)
    grid = np.arange(-RHO_BOUND, RHO_BOUND + 1e-12, GRID_STEP)
    vals = [sdpd_profile_loglik(y, W1, W2, r) for r in grid]
    assert fit.loglik >= max(vals) - 1e-9
    assert fit.loglik == pytest.approx(sdpd_profile_loglik(y, W1, W2, fit.rho), rel=1e-12)


def test_loglik_logdet_oracle():
    y = simulate_sdpd(0.1, 0.1, 0.1, W1, W2, 30, seed=8)
    v = y.values
    rho = 0.37
    a = np.eye(16) - rho * W1.entries
    z = (a @ v[:, 1:]).ravel()
    x = np.column_stack([v[:, :-1].ravel(), (W2.entries @ v[:, :-1]).ravel()])
    u = z - x @ np.linalg.lstsq(x, z, rcond=None)[0]
    s2 = u @ u / z.size
    ref = -0.5 * z.size * (np.log(2 * np.pi * s2) + 1) + 29 * np.linalg.slogdet(a)[1]
    assert sdpd_profile_loglik(y, W1, W2, rho) == pytest.approx(ref, rel=1e-12)


def test_short_panel():
    with pytest.raises(ValueError):
        fit_sdpd(Panel(np.ones((16, 5))), W1, W2)
