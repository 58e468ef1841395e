"""
Moments of the spatiotemporal E-GARCH process.

Two families are provided:

* moments of ``nu_t = ln Y_t^2 - lambda1 S ln Y_{t-1}^2`` with
  ``S = (I - lambda0 W2)^{-1}``, an MA(1)-type noise with exact mean and
  lag-0/lag-1 covariances, and of the noise ``Delta_t`` of the solved
  log-volatility recursion;
* moments of the observations ``Y_t`` themselves, written as an infinite
  product of expectations over past innovations.  With ``xi = 0`` all factors
  are Gaussian moment generating functions; otherwise each factor is a
  product of one-dimensional integrals evaluated by half-range Gauss-Hermite
  quadrature.

Notes
-----
For ``x ~ N(0, 1)`` the constants used throughout are

* ``E ln x^2 = -ln 2 - gamma`` (gamma the Euler-Mascheroni constant),
* ``Var ln x^2 = psi'(1/2) = pi^2 / 2``,
* ``Cov(|x|, ln x^2) = 2 ln 2 sqrt(2 / pi)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
import math

import mpmath
import numpy as np
from scipy.linalg import eigh_tridiagonal

from .core import ABS_MEAN_NORMAL, ModelParams, as_matrix
from .process import NonStationaryError, check_stationarity, spatial_filter

__all__ = [
    "COV_ABS_LOG_SQ",
    "DeltaNoise",
    "EULER_GAMMA",
    "MEAN_LOG_SQ",
    "MomentOrder",
    "MomentResult",
    "NuMoments",
    "TRIGAMMA_HALF",
    "closed_moments_theta_only",
    "delta_moments",
    "general_moments_quadrature",
    "half_range_hermite",
    "nu_moments",
    "var_g",
]

EULER_GAMMA = 0.57721566490153286061
#: E ln eps^2 for standard normal eps.
MEAN_LOG_SQ = -math.log(2.0) - EULER_GAMMA
#: Trigamma at 1/2, the variance of ln eps^2 for standard normal eps.
TRIGAMMA_HALF = math.pi**2 / 2.0
#: Cov(|eps|, ln eps^2) for standard normal eps.
COV_ABS_LOG_SQ = 2.0 * math.log(2.0) * ABS_MEAN_NORMAL

V_MAX = 500


def var_g(theta: float, xi: float = 1.0) -> float:
    """Variance of ``g(eps) = theta eps + xi (|eps| - E|eps|)``."""
    return theta**2 + xi**2 * (1.0 - 2.0 / math.pi)


def _cov_g(theta_a: float, theta_b: float, xi: float) -> float:
    return theta_a * theta_b + xi**2 * (1.0 - 2.0 / math.pi)


def _s_matrix(p: ModelParams, w2) -> np.ndarray:
    a = spatial_filter(p.lambda0, w2)
    if np.linalg.matrix_rank(a) < a.shape[0]:
        raise np.linalg.LinAlgError("I - lambda0 W2 is singular")
    return np.linalg.inv(a)


@dataclass(frozen=True)
class DeltaNoise:
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class NuMoments:
    mean: np.ndarray
    cov0: np.ndarray
    cov1: np.ndarray

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("mean", "cov0", "cov1")}


def delta_moments(p: ModelParams, w1, w2) -> DeltaNoise:
    """
    Mean and covariance of ``Delta_t = S (alpha 1 + rho0 W1 g(eps_t) + rho1 g(eps_{t-1}))``.
    """
    m1 = as_matrix(w1)
    s = _s_matrix(p, w2)
    n = m1.shape[0]
    v0 = var_g(p.theta, p.xi)
    v1 = var_g(p.theta_lag, p.xi)
    inner = p.rho0**2 * v0 * (m1 @ m1.T) + p.rho1**2 * v1 * np.eye(n)
    cov = s @ inner @ s.T
    return DeltaNoise(mean=s @ np.full(n, p.alpha), cov=0.5 * (cov + cov.T))


def nu_moments(p: ModelParams, w1, w2) -> NuMoments:
    """
    Exact mean, covariance and lag-one cross-covariance of ``nu_t``.

    Writing ``L_t`` for the centred ``ln eps_t^2``,

        nu_t - E nu_t = rho0 S W1 g_t + L_t + S (rho1 g_{t-1} - lambda1 L_{t-1})

    and ``Cov(nu_t, nu_{t-s}) = 0`` for ``s > 1``.

    Returns
    -------
    NuMoments
        ``cov1`` is ``Cov(nu_t, nu_{t-1}) = E (nu_t - mu)(nu_{t-1} - mu)'``.
    """
    m1 = as_matrix(w1)
    s = _s_matrix(p, w2)
    n = m1.shape[0]
    eye = np.eye(n)
    sw1 = s @ m1
    c0 = p.xi * COV_ABS_LOG_SQ  # Cov(g, L), the theta part vanishes by symmetry
    v00 = var_g(p.theta, p.xi)
    v11 = var_g(p.theta_lag, p.xi)
    v01 = _cov_g(p.theta, p.theta_lag, p.xi)
    l1, r0, r1 = p.lambda1, p.rho0, p.rho1

    mean = s @ np.full(n, p.alpha) + MEAN_LOG_SQ * (eye - l1 * s) @ np.ones(n)
    cov0 = (
        r0**2 * v00 * sw1 @ sw1.T
        + TRIGAMMA_HALF * eye
        + r0 * c0 * (sw1 + sw1.T)
        + (r1**2 * v11 + l1**2 * TRIGAMMA_HALF - 2.0 * r1 * l1 * c0) * s @ s.T
    )
    # lag-one: the t-1 block of nu_t against the contemporaneous block of nu_{t-1}
    cov1 = (r1 * r0 * v01 - l1 * r0 * c0) * s @ sw1.T + (r1 * c0 - l1 * TRIGAMMA_HALF) * s
    return NuMoments(mean=mean, cov0=0.5 * (cov0 + cov0.T), cov1=cov1)


# -- moments of Y ----------------------------------------------------------------


class MomentOrder(str, Enum):
    FIRST = "first"
    SECOND = "second"


@dataclass(frozen=True)
class MomentResult:
    """A moment of ``Y_t`` with the truncation diagnostics of its product."""

    value: float
    terms: int
    last_log_factor: float

    def to_dict(self) -> dict:
        return {"value": self.value, "terms": self.terms, "last_log_factor": self.last_log_factor}


class _Coefficients:
    """
    ``c' ln h_t`` as a linear form in the innovations.

    For a weight vector ``c``,

        c' ln h_t = c' K alpha 1 + a_0' g0(eps_t)
                    + sum_{v>=1} (a0_v' g0(eps_{t-v}) + a1_v' g1(eps_{t-v}))

    with ``K = ((1 - lambda1) I - lambda0 W2)^{-1}``, ``a_0 = rho0 W1' S' c``,
    ``u_v = lambda1^{v-1} (S')^v c``, ``a0_v = rho0 lambda1 W1' S' u_v`` and
    ``a1_v = rho1 u_v``.  ``g0`` carries ``theta`` and ``g1`` the lag leverage.
    """

    def __init__(self, p: ModelParams, w1, w2):
        check = check_stationarity(p, w2)
        if not check.strict_ok:
            raise NonStationaryError("moments require stationary parameters")
        self.p = p
        self.m1 = as_matrix(w1)
        self.m2 = as_matrix(w2)
        self.s = _s_matrix(p, self.m2)
        n = self.m1.shape[0]
        self.n = n
        self.k_alpha = np.linalg.solve((1.0 - p.lambda1) * np.eye(n) - p.lambda0 * self.m2,
                                       np.full(n, p.alpha))
        self.sw1_t = (self.s @ self.m1).T

    def contemporaneous(self, c) -> np.ndarray:
        return self.p.rho0 * self.sw1_t @ c

    def lags(self, c):
        """Yield ``(a0_v, a1_v)`` for v = 1, 2, ..."""
        p = self.p
        u = self.s.T @ c
        while True:
            yield p.rho0 * p.lambda1 * self.sw1_t @ u, p.rho1 * u
            u = p.lambda1 * (self.s.T @ u)


def _weights_and_powers(n, i, j, order):
    c = np.zeros(n)
    powers = np.zeros(n, dtype=int)
    if j is None or j == i:
        m = 1 if order == MomentOrder.FIRST else 2
        c[i] = 0.5 * m
        powers[i] = m
    else:
        c[i] = c[j] = 0.5
        powers[i] = powers[j] = 1
    return c, powers


def _check_node(n, *nodes):
    for k in nodes:
        if k is not None and not 0 <= k < n:
            raise IndexError(f"node index {k} out of range for n={n}")


def _product(log_factors, trunc_tol: float) -> tuple[float, int, float]:
    """Sum log factors until one is below ``trunc_tol`` in magnitude."""
    total = 0.0
    for v, lf in enumerate(log_factors, start=1):
        total += lf
        if abs(lf) < trunc_tol:
            return total, v, lf
        if v >= V_MAX:
            break
    raise ArithmeticError(f"product not converged after {V_MAX} factors (last log factor {lf:.3g})")


def closed_moments_theta_only(
    p: ModelParams, w1, w2, i: int, j: int | None = None, trunc_tol: float = 1e-15
) -> dict:
    """
    ``E Y_t(s_i)``, ``E Y_t(s_i)^2`` and ``E Y_t(s_i) Y_t(s_j)`` for ``xi = 0``.

    With ``xi = 0``, ``g(eps) = theta eps`` is Gaussian, so every factor of the
    infinite product is ``exp(|b|^2 / 2)`` for the loading vector ``b`` of the
    corresponding innovation, and the contemporaneous factor follows from

        E x exp(b'x) = b_1 exp(|b|^2/2),  E x^2 exp(b'x) = (1 + b_1^2) exp(|b|^2/2),
        E x_1 x_2 exp(b'x) = b_1 b_2 exp(|b|^2/2).

    The product over past innovations is truncated once a log factor drops
    below ``trunc_tol``.

    Returns
    -------
    dict
        ``mean_i``, ``second_i``, ``cross_ij`` (None when ``j`` is omitted or
        equal to ``i``) as :class:`MomentResult`.

    Raises
    ------
    ValueError
        If ``xi != 0``.
    NonStationaryError
        If the stationarity conditions fail.
    """
    if p.xi != 0.0:
        raise ValueError("closed form requires xi = 0")
    co = _Coefficients(p, w1, w2)
    _check_node(co.n, i, j)
    th0, th1 = p.theta, p.theta_lag

    def one(c, idx):
        b0 = th0 * co.contemporaneous(c)
        base = float(c @ co.k_alpha) + 0.5 * float(b0 @ b0)
        if len(idx) == 1 and c[idx[0]] == 0.5:
            pre = b0[idx[0]]
        elif len(idx) == 1:
            pre = 1.0 + b0[idx[0]] ** 2
        else:
            pre = b0[idx[0]] * b0[idx[1]]

        def logs():
            for a0, a1 in co.lags(c):
                b = th0 * a0 + th1 * a1
                yield 0.5 * float(b @ b)

        tail, terms, last = _product(logs(), trunc_tol)
        return MomentResult(float(pre * math.exp(base + tail)), terms, last)

    n = co.n
    out = {
        "mean_i": one(_weights_and_powers(n, i, None, MomentOrder.FIRST)[0], [i]),
        "second_i": one(_weights_and_powers(n, i, None, MomentOrder.SECOND)[0], [i]),
        "cross_ij": None,
    }
    if j is not None and j != i:
        out["cross_ij"] = one(_weights_and_powers(n, i, j, MomentOrder.FIRST)[0], [i, j])
    return out


@lru_cache(maxsize=8)
def half_range_hermite(n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Gauss rule for ``int_0^inf f(u) exp(-u^2) du``.

    Recurrence coefficients come from the moments ``Gamma((k+1)/2) / 2`` via
    the Chebyshev algorithm in high precision; nodes and weights from the
    eigen-decomposition of the Jacobi matrix.
    """
    if n_nodes < 1:
        raise ValueError("n_nodes must be positive")
    with mpmath.workdps(40 + 3 * n_nodes):
        mu = [mpmath.gamma(mpmath.mpf(k + 1) / 2) / 2 for k in range(2 * n_nodes)]
        alpha = [mpmath.mpf(0)] * n_nodes
        beta = [mpmath.mpf(0)] * n_nodes
        prev = [mpmath.mpf(0)] * (2 * n_nodes)
        cur = list(mu)
        alpha[0] = mu[1] / mu[0]
        beta[0] = mu[0]
        for k in range(1, n_nodes):
            nxt = [mpmath.mpf(0)] * (2 * n_nodes)
            for ell in range(k, 2 * n_nodes - k):
                nxt[ell] = cur[ell + 1] - alpha[k - 1] * cur[ell] - beta[k - 1] * prev[ell]
            alpha[k] = nxt[k + 1] / nxt[k] - cur[k] / cur[k - 1]
            beta[k] = nxt[k] / cur[k - 1]
            prev, cur = cur, nxt
        a = np.array([float(x) for x in alpha])
        off = np.array([float(mpmath.sqrt(x)) for x in beta[1:]])
        guess = eigh_tridiagonal(a, off, eigvals_only=True)
        # Golub-Welsch weights lose relative accuracy in the tail, so polish
        # each node by Newton and use the Christoffel form 1 / sum p_k(x)^2
        sq = [mpmath.sqrt(b) for b in beta]
        nodes = np.empty(n_nodes)
        weights = np.empty(n_nodes)
        for m, x0 in enumerate(guess):
            x = mpmath.mpf(float(x0))
            for _ in range(8):
                p, dp, _ = _orthonormal(x, alpha, sq)
                step = p / dp
                x -= step
                if abs(step) < mpmath.mpf(10) ** (-30):
                    break
            _, _, total = _orthonormal(x, alpha, sq)
            nodes[m] = float(x)
            weights[m] = float(1 / total)
    # exact total mass, so constant integrands come out exactly
    weights *= 0.5 * math.sqrt(math.pi) / weights.sum()
    return nodes, weights


def _orthonormal(x, alpha, sq):
    """``p_n(x)``, ``p_n'(x)`` and ``sum_{k<n} p_k(x)^2`` for the orthonormal family."""
    n = len(alpha)
    p_prev, p = mpmath.mpf(0), 1 / sq[0]
    d_prev, d = mpmath.mpf(0), mpmath.mpf(0)
    total = p * p
    for k in range(n):
        nxt_sq = sq[k + 1] if k + 1 < n else mpmath.mpf(1)  # monic scaling for p_n is irrelevant to its root
        p_next = ((x - alpha[k]) * p - (sq[k] * p_prev if k else 0)) / nxt_sq
        d_next = ((x - alpha[k]) * d + p - (sq[k] * d_prev if k else 0)) / nxt_sq
        p_prev, p, d_prev, d = p, p_next, d, d_next
        if k + 1 < n:
            total += p * p
    return p, d, total


def _normal_expectations(b: np.ndarray, c: np.ndarray, powers: np.ndarray, n_nodes: int):
    """
    ``E x^k exp(b x + c |x|)`` elementwise for x ~ N(0, 1), by half-range
    Gauss-Hermite on each side of 0.
    """
    u, w = half_range_hermite(n_nodes)
    x = math.sqrt(2.0) * u
    pos = np.exp(np.outer(b + c, x))
    neg = np.exp(np.outer(c - b, x))
    xk = x[None, :] ** powers[:, None]
    sign = np.where(powers % 2 == 1, -1.0, 1.0)[:, None]
    return ((pos + sign * neg) * xk) @ w / math.sqrt(math.pi)


def _log_mgf(b: np.ndarray, c: np.ndarray, n_nodes: int) -> np.ndarray:
    """``log E exp(b x + c |x|)``, accurate when the exponent is small."""
    u, w = half_range_hermite(n_nodes)
    x = math.sqrt(2.0) * u
    d = (np.expm1(np.outer(b + c, x)) + np.expm1(np.outer(c - b, x))) @ w / math.sqrt(math.pi)
    return np.log1p(d)


def general_moments_quadrature(
    p: ModelParams,
    w1,
    w2,
    i: int,
    order: MomentOrder | str = MomentOrder.SECOND,
    trunc_tol: float = 1e-15,
    quad_nodes: int = 64,
    j: int | None = None,
) -> MomentResult:
    """
    ``E Y_t(s_i)`` or ``E Y_t(s_i)^2`` (or ``E Y_t(s_i) Y_t(s_j)`` when
    ``j`` is given) for general ``xi``.

    Each factor of the infinite product is a product over nodes of
    ``E exp(b x + c (|x| - E|x|))``; the contemporaneous factor also carries
    the powers of ``eps_t``.  The one-dimensional integrals are split at zero
    and evaluated by ``quad_nodes``-point half-range Gauss-Hermite rules.

    Raises
    ------
    ArithmeticError
        If no log factor falls below ``trunc_tol`` within 500 terms.
    """
    order = MomentOrder(order)
    if quad_nodes < 20:
        raise ValueError("quad_nodes must be at least 20")
    co = _Coefficients(p, w1, w2)
    _check_node(co.n, i, j)
    c, powers = _weights_and_powers(co.n, i, j, order)
    th0, th1, xi = p.theta, p.theta_lag, p.xi

    a = co.contemporaneous(c)
    vals = _normal_expectations(th0 * a, xi * a, powers, quad_nodes)
    # the centring constant exp(-c E|x|) is applied in log space
    log_contemp = -xi * ABS_MEAN_NORMAL * float(a.sum())

    def logs():
        for a0, a1 in co.lags(c):
            b = th0 * a0 + th1 * a1
            cc = xi * (a0 + a1)
            yield float(np.sum(_log_mgf(b, cc, quad_nodes))) - ABS_MEAN_NORMAL * float(cc.sum())

    tail, terms, last = _product(logs(), trunc_tol)
    value = float(np.prod(vals)) * math.exp(float(c @ co.k_alpha) + log_contemp + tail)
    return MomentResult(value, terms, last)
