"""
Simulation of the spatiotemporal E-GARCH process and stationarity checks.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .core import (
    ABS_MEAN_NORMAL,
    InitialConditions,
    ModelParams,
    Panel,
    PanelKind,
    as_matrix,
    seeded_normal_panel,
)

__all__ = [
    "NonStationaryError",
    "SimulationResult",
    "StationarityReport",
    "check_stationarity",
    "g_transform",
    "simulate",
]


class NonStationaryError(ValueError):
    """Parameters violate the stationarity conditions."""


def g_transform(eps, theta: float, xi: float = 1.0, abs_mean: float = ABS_MEAN_NORMAL):
    """News impact ``theta * eps + xi * (|eps| - abs_mean)``, elementwise."""
    eps = np.asarray(eps, dtype=float)
    return theta * eps + xi * (np.abs(eps) - abs_mean)


@dataclass(frozen=True)
class StationarityReport:
    rho_spec_A: float
    rho_spec_B: float
    sufficient_ok: bool
    strict_ok: bool

    def to_dict(self) -> dict:
        return asdict(self)


def spatial_filter(lambda0: float, w2) -> np.ndarray:
    """``I - lambda0 W2``."""
    w = as_matrix(w2)
    return np.eye(w.shape[0]) - lambda0 * w


def check_stationarity(p: ModelParams, w2) -> StationarityReport:
    """
    Spectral radii of ``lambda1 (I - lambda0 W2)^{-1}`` and ``lambda0 W2``.

    ``sufficient_ok`` is the norm bound ``|lambda1| + |lambda0| ||W2||_inf < 1``,
    which reduces to ``|lambda0| + |lambda1| < 1`` for row-standardized W2.

    Raises
    ------
    NonStationaryError
        If ``I - lambda0 W2`` is singular.
    """
    w = as_matrix(w2)
    a = spatial_filter(p.lambda0, w)
    if np.linalg.matrix_rank(a) < a.shape[0]:
        raise NonStationaryError("I - lambda0 W2 is singular")
    s = np.linalg.inv(a)
    rho_a = float(np.max(np.abs(np.linalg.eigvals(p.lambda1 * s))))
    rho_b = float(np.max(np.abs(np.linalg.eigvals(p.lambda0 * w))))
    w_norm = float(np.max(np.abs(w).sum(axis=1)))
    sufficient = abs(p.lambda1) + abs(p.lambda0) * w_norm < 1.0
    strict = rho_a < 1.0 and rho_b < 1.0
    return StationarityReport(rho_a, rho_b, bool(sufficient), bool(strict))


@dataclass(frozen=True)
class SimulationResult:
    y: Panel
    eps: Panel
    h: Panel
    log_h: Panel
    report: StationarityReport
    burn_in: int
    seed: int


def simulate(
    p: ModelParams,
    w1,
    w2,
    t_len: int,
    burn_in: int = 50,
    init: InitialConditions | None = None,
    seed: int = 0,
    eps: np.ndarray | None = None,
) -> SimulationResult:
    """
    Simulate ``t_len`` observations after discarding ``burn_in`` points.

    Parameters
    ----------
    p : ModelParams
        Must satisfy the strict (spectral radius) stationarity conditions.
    w1, w2 : WeightMatrix or ndarray
        Weights of the E-GARCH and GARCH spatial terms.
    init : InitialConditions, optional
        ``ln h_0 = ln(y0^2 / eps0^2)`` and ``eps_0``.  Defaults to 1e-4
        everywhere.
    seed : int
        Seed of the innovation stream.
    eps : ndarray, optional
        ``(n, burn_in + t_len)`` innovations to use instead of drawing them.

    Returns
    -------
    SimulationResult
        Panels of returns ``y``, innovations, volatilities ``h`` and ``ln h``.
    """
    m1, m2 = as_matrix(w1), as_matrix(w2)
    n = m1.shape[0]
    if m2.shape != (n, n):
        raise ValueError("w1 and w2 must have the same dimension")
    if t_len < 1 or burn_in < 0:
        raise ValueError("t_len must be >= 1 and burn_in >= 0")
    report = check_stationarity(p, m2)
    if not report.strict_ok:
        raise NonStationaryError(
            f"non-stationary parameters: rho(A)={report.rho_spec_A:.4g}, "
            f"rho(B)={report.rho_spec_B:.4g}"
        )
    init = init if init is not None else InitialConditions.constant(n)
    total = burn_in + t_len
    if eps is None:
        e = seeded_normal_panel(n, total, seed).by_time()
    else:
        e = np.ascontiguousarray(np.asarray(eps, dtype=float).T)
        if e.shape != (total, n):
            raise ValueError(f"eps must have shape ({n}, {total})")
    s = np.linalg.inv(spatial_filter(p.lambda0, m2))
    log_h = _kernels.simulate_log_h(
        e, init.eps0, init.log_h0, p.alpha, p.rho0, p.rho1, p.lambda1, p.theta,
        p.theta_lag, p.xi, ABS_MEAN_NORMAL, np.ascontiguousarray(s),
        np.ascontiguousarray(s @ m1),
    )
    log_h = log_h[burn_in:]
    e = e[burn_in:]
    h = np.exp(log_h)
    y = np.sqrt(h) * e
    return SimulationResult(
        y=Panel(y.T, PanelKind.RETURNS),
        eps=Panel(e.T, PanelKind.INNOVATIONS),
        h=Panel(h.T, PanelKind.VOLATILITY),
        log_h=Panel(log_h.T, PanelKind.LOG_VOLATILITY),
        report=report,
        burn_in=burn_in,
        seed=seed,
    )
