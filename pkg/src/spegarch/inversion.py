"""
Recover innovations from observations by per-period Newton solves.

Given ``eps_{t-1}`` and ``Y_{t-1}``, the innovations at time ``t`` solve

    (I - l0 W2) ln eps_t^2 + r0 W1 g(eps_t)
        = (I - l0 W2) ln Y_t^2 - alpha - r1 g(eps_{t-1}) - l1 (ln Y_{t-1}^2 - ln eps_{t-1}^2)

The unknowns are ``x = ln eps_t^2``; the sign of ``eps_t`` is the sign of
``Y_t``, which makes ``g`` smooth in ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import (
    ABS_MEAN_NORMAL,
    InitialConditions,
    ModelParams,
    Panel,
    PanelKind,
    as_matrix,
)
from .process import g_transform, spatial_filter

__all__ = [
    "BURN_STEPS",
    "InversionDiagnostics",
    "InversionError",
    "NewtonOptions",
    "invert_panel",
    "invert_step",
    "invertibility_det",
]

#: Leading periods dominated by the assumed initial values.
BURN_STEPS = 5

_STATUS_TEXT = {
    _kernels.NO_CONVERGENCE: "Newton did not converge",
    _kernels.SINGULAR: "singular Newton Jacobian",
    _kernels.NON_FINITE: "non-finite residual",
}


class InversionError(RuntimeError):
    """Newton inversion failed; ``t`` is the failing (0-based) period."""

    def __init__(self, message: str, t: int | None = None, status: int | None = None):
        super().__init__(message if t is None else f"{message} at t={t}")
        self.t = t
        self.status = status


@dataclass(frozen=True)
class NewtonOptions:
    tol: float = 1e-10
    max_iter: int = 100


@dataclass(frozen=True)
class InversionDiagnostics:
    iterations: np.ndarray
    residuals: np.ndarray
    log_abs_det: np.ndarray
    burn_in: np.ndarray

    def rows(self):
        for t in range(self.iterations.shape[0]):
            yield t + 1, int(self.iterations[t]), float(self.residuals[t]), float(
                self.log_abs_det[t]
            ), bool(self.burn_in[t])


def _check_nonzero(name, v):
    if np.any(np.asarray(v) == 0):
        raise ValueError(f"{name} contains zeros")


def invert_step(
    y_t,
    y_prev,
    eps_prev,
    p: ModelParams,
    w1,
    w2,
    opts: NewtonOptions = NewtonOptions(),
    log_h_prev=None,
) -> np.ndarray:
    """
    Innovations at one period given the previous observation and innovation.

    ``log_h_prev`` defaults to ``ln(y_prev^2 / eps_prev^2)``.  With
    ``rho0 == 0`` the system is linear in ``ln eps_t^2`` and is solved
    directly.

    Raises
    ------
    InversionError
        On Newton failure.
    """
    y_t = np.asarray(y_t, dtype=float)
    y_prev = np.asarray(y_prev, dtype=float)
    eps_prev = np.asarray(eps_prev, dtype=float)
    _check_nonzero("y_t", y_t)
    _check_nonzero("y_prev", y_prev)
    _check_nonzero("eps_prev", eps_prev)
    m1, m2 = as_matrix(w1), as_matrix(w2)
    a = spatial_filter(p.lambda0, m2)
    if log_h_prev is None:
        log_h_prev = np.log(y_prev**2) - np.log(eps_prev**2)
    b = p.alpha + p.rho1 * g_transform(eps_prev, p.theta_lag, p.xi) + p.lambda1 * log_h_prev
    log_y2 = np.log(y_t**2)
    c = a @ log_y2 - b
    sgn = np.sign(y_t)
    if p.rho0 == 0.0:
        x = np.linalg.solve(a, c)
        return sgn * np.exp(0.5 * x)
    x0 = log_y2 - np.linalg.solve(a, b)
    try:
        x, _, res, _, status = _kernels.newton_step_solve(
            np.clip(x0, _kernels.X_MIN, _kernels.X_MAX), sgn, np.ascontiguousarray(a),
            np.ascontiguousarray(m1), p.rho0, p.theta, p.xi, ABS_MEAN_NORMAL, c,
            opts.tol, opts.max_iter,
        )
    except np.linalg.LinAlgError as exc:
        raise InversionError("singular Newton Jacobian", status=_kernels.SINGULAR) from exc
    if status != _kernels.OK:
        raise InversionError(_STATUS_TEXT[status], status=status)
    return sgn * np.exp(0.5 * x)


def _prepare(y, p: ModelParams, w1, w2, init: InitialConditions | None):
    yt = y.by_time() if isinstance(y, Panel) else np.ascontiguousarray(np.asarray(y, float).T)
    if np.any(yt == 0):
        t, i = np.argwhere(yt == 0)[0]
        raise ValueError(f"zero observation at node {i + 1}, t={t + 1}")
    if not np.all(np.isfinite(yt)):
        raise ValueError("observations contain NaN or Inf")
    n = yt.shape[1]
    init = init if init is not None else InitialConditions.constant(n)
    if init.y0.shape[0] != n:
        raise ValueError("initial conditions do not match the number of nodes")
    m1 = np.ascontiguousarray(as_matrix(w1))
    m2 = np.ascontiguousarray(as_matrix(w2))
    if m1.shape != (n, n) or m2.shape != (n, n):
        raise ValueError("weight matrices do not match the number of nodes")
    return np.log(yt**2), np.sign(yt), init, m1, m2


def invert_panel(
    y,
    p: ModelParams,
    w1,
    w2,
    init: InitialConditions | None = None,
    opts: NewtonOptions = NewtonOptions(),
) -> tuple[Panel, InversionDiagnostics]:
    """
    Sequentially invert a panel of observations into innovations.

    Parameters
    ----------
    y : Panel or ndarray
        ``(n, T)`` observations without zeros.
    init : InitialConditions, optional
        Known ``Y_0`` and ``eps_0``; defaults to 1e-4 everywhere.

    Returns
    -------
    eps_tilde : Panel
        Recovered innovations, same sign as ``y``.
    diagnostics : InversionDiagnostics
        Newton iterations, final residual max-norm and ``log|det|`` of the
        Newton Jacobian per period; the first five periods are flagged as
        burn-in.

    Raises
    ------
    InversionError
        Carries the failing period in ``.t``.
    """
    log_y2, sgn, init, m1, m2 = _prepare(y, p, w1, w2, init)
    try:
        xs, iters, resid, logdets, status, fail = _kernels.invert_series(
            log_y2, sgn, init.eps0, init.log_h0, p.alpha, p.rho0, p.rho1, p.lambda0,
            p.lambda1, p.theta, p.theta_lag, p.xi, ABS_MEAN_NORMAL, m1, m2, opts.tol,
            opts.max_iter,
        )
    except np.linalg.LinAlgError as exc:
        raise InversionError("singular Newton Jacobian", status=_kernels.SINGULAR) from exc
    if status != _kernels.OK:
        raise InversionError(_STATUS_TEXT[status], t=int(fail), status=int(status))
    eps = sgn * np.exp(0.5 * xs)
    t_len = eps.shape[0]
    diag = InversionDiagnostics(
        iterations=iters,
        residuals=resid,
        log_abs_det=logdets,
        burn_in=np.arange(t_len) < BURN_STEPS,
    )
    return Panel(eps.T, PanelKind.INNOVATIONS), diag


def invertibility_det(eps_t, p: ModelParams, w1, w2, sign=None) -> float:
    """
    ``det(I + 1/2 rho0 (I - l0 W2)^{-1} W1 o (theta eps 1' + xi eps sgn'))``.

    ``sign`` defaults to ``sgn(eps_t)``, the sign entering the derivative of
    ``|eps_t|``; pass ``sgn(eps_{t-1})`` to evaluate the alternative form.
    A value near zero means the period cannot be inverted uniquely.
    """
    eps_t = np.asarray(eps_t, dtype=float)
    sign = np.sign(eps_t) if sign is None else np.asarray(sign, dtype=float)
    m1, m2 = as_matrix(w1), as_matrix(w2)
    n = m1.shape[0]
    b = p.rho0 * np.linalg.solve(spatial_filter(p.lambda0, m2), m1)
    hadamard = p.theta * np.outer(eps_t, np.ones(n)) + p.xi * np.outer(eps_t, sign)
    return float(np.linalg.det(np.eye(n) + 0.5 * b * hadamard))
