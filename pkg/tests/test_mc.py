import csv

import numpy as np
import pytest

from spegarch import mc
from spegarch.core import INVERSION_STUDY_PARAMS
from spegarch.likelihood import FitOptions
from spegarch.mc import McConfig, McFailureError, resolve_threads, run_bias_rmse, run_invertibility_study

FAST = FitOptions(n_starts=3, n_local=1, compute_se=False)


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(replications=0)
    with pytest.raises(ValueError):
        McConfig(model="C").params
    cfg = McConfig.from_dict({"model": "b", "grid": [2, 3], "fit_options": {"n_starts": 2}})
    assert cfg.grid == (2, 3) and not cfg.fit_options.compute_se
    assert McConfig.from_dict(cfg.to_dict()) == cfg


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("ST_EGARCH_THREADS", "3")
    assert resolve_threads() == 3 and resolve_threads(2) == 2
    monkeypatch.delenv("ST_EGARCH_THREADS")
    assert resolve_threads() == 1


def test_single_replication_reproducible():
    cfg = McConfig(grid=(2, 2), t_len=40, replications=1, seed=4, fit_options=FAST)
    a, b = run_bias_rmse(cfg), run_bias_rmse(cfg)
    assert np.array_equal(a.estimates, b.estimates)
    assert a.table() == b.table() and len(a.table()) == 6


def test_bias_rmse_definitions():
    cfg = McConfig(grid=(2, 2), t_len=40, replications=3, seed=1, fit_options=FAST)
    r = run_bias_rmse(cfg)
    d = r.estimates - r.truth
    assert np.allclose(r.bias, d.mean(axis=0)) and np.allclose(r.rmse, np.sqrt((d**2).mean(axis=0)))


def test_parallel_equals_serial():
    cfg = McConfig(grid=(2, 2), t_len=40, replications=2, seed=2, fit_options=FAST)
    assert np.array_equal(run_bias_rmse(cfg, threads=1).estimates, run_bias_rmse(cfg, threads=2).estimates)


def test_failure_cap(monkeypatch):
    monkeypatch.setattr(mc, "_one_replication", lambda cfg, r: (r, None, False, "boom", 0.0))
    with pytest.raises(McFailureError):
        run_bias_rmse(McConfig(replications=4, fit_options=FAST))


def test_failures_excluded(monkeypatch):
    real = mc._one_replication
    monkeypatch.setattr(mc, "_one_replication", lambda cfg, r: real(cfg, r) if r else (r, None, False, "boom", 0.0))
    r = run_bias_rmse(McConfig(grid=(2, 2), t_len=40, replications=20, fit_options=FAST))
    assert r.failures == ((0, "boom"),) and r.estimates.shape == (19, 6)


def test_invertibility_zero_perturbation():
    st = run_invertibility_study(grid=(3, 3), t_len=30, steps={k: 0.0 for k in mc.DEFAULT_STEPS}, points=3, m=2, pairs=[("rho0", "theta")])
    assert np.all(st.ssd[("rho0", "theta")] < 1e-3)
    assert st.maxd[-1] < 1e-10 and st.failures == 0


def test_invertibility_even_points():
    with pytest.raises(ValueError):
        run_invertibility_study(points=4, m=1)
