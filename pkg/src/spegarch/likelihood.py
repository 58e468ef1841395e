"""
Conditional quasi log-likelihood, QML estimation and Hessian standard errors.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
import logging
import math

import numpy as np
from scipy import optimize

from . import _kernels
from .core import (
    ABS_MEAN_NORMAL,
    InitialConditions,
    ModelParams,
    Panel,
    as_matrix,
    make_rng,
)
from .inversion import (
    BURN_STEPS,
    InversionError,
    NewtonOptions,
    _prepare,
    _STATUS_TEXT,
)

__all__ = [
    "EstimationResult",
    "FitOptions",
    "StdErrorResult",
    "fit_qmle",
    "hessian_std_errors",
    "log_likelihood",
    "numerical_hessian",
    "std_errors_from_hessian",
]

logger = logging.getLogger(__name__)

#: Extra random starts drawn when none of the screened ones can be inverted.
MAX_EXTRA_STARTS = 200


class _Objective:
    """Log-likelihood of one data set as a function of the parameters."""

    def __init__(self, y, w1, w2, init, burn, newton: NewtonOptions):
        self.log_y2, self.sgn, self.init, self.w1, self.w2 = _prepare(y, None, w1, w2, init)
        self.n = self.log_y2.shape[1]
        self.t_len = self.log_y2.shape[0]
        if not 0 <= burn < self.t_len:
            raise ValueError("burn must be in [0, T)")
        self.burn = burn
        self.newton = newton
        self.calls = 0

    def __call__(self, p: ModelParams) -> tuple[float, int]:
        self.calls += 1
        try:
            return _kernels.log_likelihood_kernel(
                self.log_y2, self.sgn, self.init.eps0, self.init.log_h0, p.alpha, p.rho0,
                p.rho1, p.lambda0, p.lambda1, p.theta, p.theta_lag, p.xi, ABS_MEAN_NORMAL,
                self.w1, self.w2, self.newton.tol, self.newton.max_iter, self.burn,
            )
        except np.linalg.LinAlgError:
            return -np.inf, _kernels.SINGULAR


def log_likelihood(
    p: ModelParams,
    y,
    w1,
    w2,
    init: InitialConditions | None = None,
    burn: int = BURN_STEPS,
    newton: NewtonOptions = NewtonOptions(),
) -> float:
    """
    Conditional Gaussian quasi log-likelihood of ``y`` given ``Y_0, eps_0``.

    Each period contributes ``ln phi_n(eps_t) - ln|det J_t|`` where
    ``J_t = dY_t / d eps_t``; the first ``burn`` periods are dropped.

    Raises
    ------
    InversionError
        If the innovations cannot be recovered.
    FloatingPointError
        If a Jacobian determinant underflows (degenerate Jacobian).
    """
    obj = _Objective(y, w1, w2, init, burn, newton)
    value, status = obj(p)
    if status != _kernels.OK:
        raise InversionError(_STATUS_TEXT.get(status, "inversion failed"), status=status)
    return float(value)


# -- standard errors ---------------------------------------------------------


def numerical_hessian(func, x, step=None) -> np.ndarray:
    """
    Central finite-difference Hessian of a scalar function.

    ``step`` defaults to ``1e-3 * max(1, |x_i|)``.
    """
    x = np.asarray(x, dtype=float)
    k = x.shape[0]
    h = np.full(k, 1e-3) * np.maximum(1.0, np.abs(x)) if step is None else np.broadcast_to(
        np.asarray(step, dtype=float), (k,)
    )
    f0 = func(x)
    hess = np.empty((k, k))
    ei = np.eye(k)
    for i in range(k):
        xp, xm = x + h[i] * ei[i], x - h[i] * ei[i]
        hess[i, i] = (func(xp) - 2.0 * f0 + func(xm)) / h[i] ** 2
        for j in range(i):
            d = (
                func(x + h[i] * ei[i] + h[j] * ei[j])
                - func(x + h[i] * ei[i] - h[j] * ei[j])
                - func(x - h[i] * ei[i] + h[j] * ei[j])
                + func(x - h[i] * ei[i] - h[j] * ei[j])
            ) / (4.0 * h[i] * h[j])
            hess[i, j] = hess[j, i] = d
    return hess


@dataclass(frozen=True)
class StdErrorResult:
    std_errors: np.ndarray | None
    ridge: float
    ok: bool
    message: str = ""


def std_errors_from_hessian(neg_hessian: np.ndarray, max_cond: float = 1e12) -> StdErrorResult:
    """
    ``sqrt(diag(H^{-1}))`` for the Hessian ``H`` of the negative log-likelihood.

    A ridge ``H + r I`` is added when the condition number exceeds
    ``max_cond``; ``r`` is reported.
    """
    h = 0.5 * (neg_hessian + neg_hessian.T)
    if not np.all(np.isfinite(h)):
        return StdErrorResult(None, 0.0, False, "non-finite Hessian")
    ridge = 0.0
    eig = np.linalg.eigvalsh(h)
    top = np.max(np.abs(eig))
    if top == 0:
        return StdErrorResult(None, 0.0, False, "zero Hessian")
    if np.min(np.abs(eig)) < top / max_cond:
        ridge = top / max_cond
        h = h + ridge * np.eye(h.shape[0])
        eig = np.linalg.eigvalsh(h)
    if np.min(eig) <= 0:
        return StdErrorResult(None, ridge, False, "Hessian not positive definite")
    cov = np.linalg.inv(h)
    return StdErrorResult(np.sqrt(np.diag(cov)), ridge, True)


def hessian_std_errors(
    p_hat: ModelParams,
    y,
    w1,
    w2,
    init: InitialConditions | None = None,
    burn: int = BURN_STEPS,
    newton: NewtonOptions = NewtonOptions(),
    step=None,
) -> StdErrorResult:
    """Standard errors of the free parameters from the observed information."""
    obj = _Objective(y, w1, w2, init, burn, newton)
    xi, two = p_hat.xi, p_hat.two_theta

    def neg_ll(x):
        v, _ = obj(ModelParams.from_free_vector(x, xi=xi, two_theta=two))
        return -v

    hess = numerical_hessian(neg_ll, p_hat.free_vector(), step)
    return std_errors_from_hessian(hess)


# -- estimation ----------------------------------------------------------------


@dataclass(frozen=True)
class FitOptions:
    """
    Parameters
    ----------
    n_starts : int
        Random feasible parameter vectors screened by likelihood.
    n_local : int
        Best screened candidates refined by local optimisation.
    burn : int
        Leading periods dropped from the likelihood.
    seed : int
        Seed of the start generator.
    delta : float
        Margin in ``|lambda1| + |lambda0| ||W2||_inf < 1 - delta``.
    two_theta : bool
        Estimate separate leverage parameters for the W1 and lagged terms.
    """

    n_starts: int = 20
    n_local: int = 2
    burn: int = BURN_STEPS
    seed: int = 0
    delta: float = 1e-3
    two_theta: bool = False
    simplex_maxfev: int = 800
    quasi_newton_maxiter: int = 200
    compute_se: bool = True
    newton: NewtonOptions = field(default_factory=NewtonOptions)

    @classmethod
    def from_dict(cls, d: dict) -> FitOptions:
        d = dict(d)
        if "newton" in d and isinstance(d["newton"], dict):
            d["newton"] = NewtonOptions(**d["newton"])
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EstimationResult:
    params: ModelParams
    std_errors: np.ndarray | None
    loglik: float
    aic: float
    bic: float
    converged: bool
    n_inversions: int
    burn_dropped: int
    n_obs: int
    on_boundary: bool = False
    se_ridge: float = 0.0
    se_message: str = ""
    trace: tuple = ()

    @property
    def names(self) -> tuple[str, ...]:
        return self.params.free_names()

    def to_dict(self) -> dict:
        se = None if self.std_errors is None else dict(zip(self.names, map(float, self.std_errors)))
        return {
            "params": self.params.to_dict(),
            "std_errors": se,
            "loglik": self.loglik,
            "aic": self.aic,
            "bic": self.bic,
            "converged": self.converged,
            "on_boundary": self.on_boundary,
            "n_inversions": self.n_inversions,
            "burn_dropped": self.burn_dropped,
            "n_obs": self.n_obs,
            "se_ridge": self.se_ridge,
            "se_message": self.se_message,
        }


def information_criteria(loglik: float, k: int, n_obs: int) -> tuple[float, float]:
    return -2.0 * loglik + 2.0 * k, -2.0 * loglik + k * math.log(n_obs)


class _Transform:
    """
    Unconstrained vector <-> parameters inside the admissible region.

    theta = tanh(z);  lambda1 = c tanh(z);  lambda0 = (c - |lambda1|) / ||W2|| tanh(z)
    so that ``|lambda1| + ||W2|| |lambda0| < c = 1 - delta``.
    """

    def __init__(self, w2_norm: float, delta: float, two_theta: bool):
        self.w2_norm = max(w2_norm, 1e-12)
        self.c = 1.0 - delta
        self.two_theta = two_theta

    def to_params(self, z) -> ModelParams:
        lam1 = self.c * math.tanh(z[5])
        lam0 = (self.c - abs(lam1)) / self.w2_norm * math.tanh(z[4])
        theta1 = math.tanh(z[6]) if self.two_theta else None
        return ModelParams(
            alpha=float(z[0]), rho0=float(z[1]), rho1=float(z[2]), lambda0=lam0,
            lambda1=lam1, theta=math.tanh(z[3]), xi=1.0, theta1=theta1,
        )

    def from_params(self, p: ModelParams) -> np.ndarray:
        clip = 1.0 - 1e-9
        z5 = math.atanh(np.clip(p.lambda1 / self.c, -clip, clip))
        room = (self.c - abs(self.c * math.tanh(z5))) / self.w2_norm
        z4 = math.atanh(np.clip(p.lambda0 / room, -clip, clip))
        z = [p.alpha, p.rho0, p.rho1, math.atanh(np.clip(p.theta, -clip, clip)), z4, z5]
        if self.two_theta:
            z.append(math.atanh(np.clip(p.theta_lag, -clip, clip)))
        return np.array(z)

    def on_boundary(self, p: ModelParams, tol: float = 1e-4) -> bool:
        lam = abs(p.lambda1) + self.w2_norm * abs(p.lambda0)
        thetas = [abs(p.theta)] + ([abs(p.theta1)] if self.two_theta else [])
        return lam > self.c - tol or max(thetas) > 1.0 - tol


def random_start(rng: np.random.Generator, transform: _Transform) -> ModelParams:
    """One random feasible parameter vector."""
    lam1 = rng.uniform(-0.9, 0.9) * transform.c
    room = (transform.c - abs(lam1)) / transform.w2_norm
    lam0 = rng.uniform(-0.9, 0.9) * room
    return ModelParams(
        alpha=rng.uniform(-1.0, 1.0),
        rho0=rng.uniform(-0.5, 1.0),
        rho1=rng.uniform(-0.5, 1.0),
        lambda0=lam0,
        lambda1=lam1,
        theta=rng.uniform(-0.8, 0.8),
        theta1=rng.uniform(-0.8, 0.8) if transform.two_theta else None,
    )


def fit_qmle(
    y,
    w1,
    w2,
    init: InitialConditions | None = None,
    opts: FitOptions = FitOptions(),
    start: ModelParams | None = None,
) -> EstimationResult:
    """
    Quasi-maximum likelihood estimate with ``xi = 1`` fixed.

    Random feasible starts are screened by likelihood; the best ``n_local``
    are refined by Nelder-Mead followed by BFGS in an unconstrained
    reparameterisation that keeps ``|theta| < 1`` and the stationarity
    margin.  ``start`` is added to the candidate pool when given.

    Raises
    ------
    RuntimeError
        If no candidate yields a finite likelihood.
    """
    obj = _Objective(y, w1, w2, init, opts.burn, opts.newton)
    w2_norm = float(np.max(np.abs(as_matrix(w2)).sum(axis=1)))
    tr = _Transform(w2_norm, opts.delta, opts.two_theta)
    rng = make_rng(opts.seed)

    def neg_ll(z):
        v, _ = obj(tr.to_params(z))
        return 1e10 if not np.isfinite(v) else -v

    candidates = [random_start(rng, tr) for _ in range(opts.n_starts)]
    if start is not None:
        if start.two_theta != opts.two_theta:
            start = start.replace(theta1=start.theta if opts.two_theta else None)
        candidates.append(start)
    scored = []
    for c in candidates:
        z = tr.from_params(c)
        scored.append((neg_ll(z), len(scored), z))
    # keep drawing while every start fails to invert
    extra = 0
    while min(s[0] for s in scored) >= 1e10 and extra < MAX_EXTRA_STARTS:
        z = tr.from_params(random_start(rng, tr))
        scored.append((neg_ll(z), len(scored), z))
        extra += 1
    scored.sort(key=lambda s: (s[0], s[1]))
    if not np.isfinite(scored[0][0]) or scored[0][0] >= 1e10:
        raise RuntimeError("no start yields a finite likelihood")

    best = None
    trace = []
    for value0, idx, z0 in scored[: max(1, opts.n_local)]:
        if value0 >= 1e10:
            continue
        nm = optimize.minimize(
            neg_ll, z0, method="Nelder-Mead",
            options={"maxfev": opts.simplex_maxfev, "xatol": 1e-6, "fatol": 1e-8},
        )
        qn = optimize.minimize(
            neg_ll, nm.x, method="BFGS",
            options={"maxiter": opts.quasi_newton_maxiter, "gtol": 1e-5},
        )
        x, fun = (qn.x, qn.fun) if qn.fun <= nm.fun else (nm.x, nm.fun)
        # BFGS with differenced gradients often stops on precision loss
        # (status 2) at the optimum; that counts as converged.
        converged = bool(qn.success or qn.status == 2 or (nm.success and nm.fun <= qn.fun))
        trace.append((idx, float(value0), float(nm.fun), float(qn.fun), converged))
        logger.debug("start %d: %.6g -> %.6g -> %.6g", idx, value0, nm.fun, qn.fun)
        if best is None or fun < best[1]:
            best = (x, fun, converged)
    if best is None:
        raise RuntimeError("all starts failed")
    z_hat, fun_hat, converged = best
    p_hat = tr.to_params(z_hat)
    loglik = -float(fun_hat)
    k = len(p_hat.free_names())
    n_obs = obj.n * (obj.t_len - opts.burn)
    aic, bic = information_criteria(loglik, k, n_obs)
    se = StdErrorResult(None, 0.0, False, "not computed")
    boundary = tr.on_boundary(p_hat)
    if opts.compute_se:
        if boundary:
            se = StdErrorResult(None, 0.0, False, "estimate on constraint boundary")
        else:

            def neg_ll_free(x):
                v, _ = obj(ModelParams.from_free_vector(x, two_theta=opts.two_theta))
                return -v

            se = std_errors_from_hessian(numerical_hessian(neg_ll_free, p_hat.free_vector()))
    return EstimationResult(
        params=p_hat,
        std_errors=se.std_errors,
        loglik=loglik,
        aic=aic,
        bic=bic,
        converged=converged,
        n_inversions=obj.calls,
        burn_dropped=opts.burn,
        n_obs=n_obs,
        on_boundary=boundary,
        se_ridge=se.ridge,
        se_message=se.message,
        trace=tuple(trace),
    )
