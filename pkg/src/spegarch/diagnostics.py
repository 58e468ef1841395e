"""
Residual adequacy tests: Ljung-Box over time per node and Moran's I over the
network per time point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import Panel, as_matrix

__all__ = ["DiagnosticsReport", "ljung_box", "morans_i", "panel_diagnostics"]


def ljung_box(series, max_lag: int = 10) -> tuple[float, float]:
    """
    Ljung-Box portmanteau statistic and its chi-square p-value.

    ``Q = T (T + 2) sum_{k=1}^{m} r_k^2 / (T - k)``.

    Raises
    ------
    ValueError
        For a constant series or ``max_lag`` outside ``[1, T)``.
    """
    x = np.asarray(series, dtype=float)
    t = x.shape[0]
    if not 1 <= max_lag < t:
        raise ValueError("need 1 <= max_lag < T")
    z = x - x.mean()
    denom = float(z @ z)
    if denom == 0.0:
        raise ValueError("constant series")
    lags = np.arange(1, max_lag + 1)
    r = np.array([z[k:] @ z[:-k] for k in lags]) / denom
    q = t * (t + 2) * float(np.sum(r**2 / (t - lags)))
    return q, float(stats.chi2.sf(q, max_lag))


def morans_i(x, w) -> tuple[float, float]:
    """
    Moran's I with a two-sided normal p-value under randomization.

    Raises
    ------
    ValueError
        For zero-variance ``x`` or all-zero weights.
    """
    x = np.asarray(x, dtype=float)
    m = as_matrix(w)
    n = x.shape[0]
    s0 = m.sum()
    if s0 == 0:
        raise ValueError("all-zero weights")
    z = x - x.mean()
    m2 = float(z @ z)
    if m2 == 0:
        raise ValueError("zero-variance input")
    i_stat = n / s0 * float(z @ m @ z) / m2
    s1 = 0.5 * np.sum((m + m.T) ** 2)
    s2 = np.sum((m.sum(axis=0) + m.sum(axis=1)) ** 2)
    b2 = n * np.sum(z**4) / m2**2
    e_i = -1.0 / (n - 1)
    e_i2 = (
        n * ((n**2 - 3 * n + 3) * s1 - n * s2 + 3 * s0**2)
        - b2 * ((n**2 - n) * s1 - 2 * n * s2 + 6 * s0**2)
    ) / ((n - 1) * (n - 2) * (n - 3) * s0**2)
    var = e_i2 - e_i**2
    if var <= 0:
        return i_stat, float("nan")
    zscore = (i_stat - e_i) / np.sqrt(var)
    return i_stat, float(2.0 * stats.norm.sf(abs(zscore)))


@dataclass(frozen=True)
class DiagnosticsReport:
    lb_raw: np.ndarray
    lb_squared: np.ndarray
    moran_raw: np.ndarray
    moran_squared: np.ndarray
    alpha: float

    def fractions(self) -> dict:
        return {
            k: float(np.mean(getattr(self, k) < self.alpha))
            for k in ("lb_raw", "lb_squared", "moran_raw", "moran_squared")
        }

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "significant_fraction": self.fractions()}


def panel_diagnostics(residuals, w, max_lag: int = 10, alpha: float = 0.05) -> DiagnosticsReport:
    """Ljung-Box per node and Moran's I per time, on residuals and their squares."""
    u = residuals.values if isinstance(residuals, Panel) else np.asarray(residuals, float)
    sq = u**2
    lb = np.array([ljung_box(row, max_lag)[1] for row in u])
    lb2 = np.array([ljung_box(row, max_lag)[1] for row in sq])
    mi = np.array([morans_i(col, w)[1] for col in u.T])
    mi2 = np.array([morans_i(col, w)[1] for col in sq.T])
    return DiagnosticsReport(lb, lb2, mi, mi2, alpha)
