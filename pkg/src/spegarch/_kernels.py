"""
Compiled recursions.  Arrays are ``(T, n)``, C-contiguous, float64.

Status codes returned by the inversion kernels:
0 ok, 1 Newton did not converge, 2 singular Newton Jacobian,
3 non-finite values.  An exactly singular Jacobian inside Newton raises
numpy.linalg.LinAlgError from the compiled solve; callers translate it.
"""

import numpy as np
from numba import njit

OK = 0
NO_CONVERGENCE = 1
SINGULAR = 2
NON_FINITE = 3

# ln(eps^2) is kept inside this box so exp(x / 2) cannot overflow.
X_MIN = -200.0
X_MAX = 200.0


@njit(cache=True)
def g_scalar(e, theta, xi, abs_mean):
    return theta * e + xi * (abs(e) - abs_mean)


@njit(cache=True)
def simulate_log_h(eps, eps0, log_h0, alpha, rho0, rho1, lam1, theta0, theta1, xi,
                   abs_mean, s_mat, sw1):
    """
    Solved recursion ln h_t = S (alpha + rho0 W1 g(eps_t) + rho1 g(eps_{t-1})
    + lam1 ln h_{t-1}) with S = (I - lam0 W2)^{-1} and sw1 = S W1.
    """
    t_len, n = eps.shape
    out = np.empty((t_len, n))
    prev_h = log_h0.copy()
    prev_e = eps0.copy()
    g_now = np.empty(n)
    rhs = np.empty(n)
    for t in range(t_len):
        for i in range(n):
            g_now[i] = g_scalar(eps[t, i], theta0, xi, abs_mean)
            rhs[i] = alpha + rho1 * g_scalar(prev_e[i], theta1, xi, abs_mean) + lam1 * prev_h[i]
        cur = s_mat @ rhs + rho0 * (sw1 @ g_now)
        for i in range(n):
            out[t, i] = cur[i]
            prev_h[i] = cur[i]
            prev_e[i] = eps[t, i]
    return out


@njit(cache=True)
def _residual(x, sgn, a_mat, w1, rho0, theta0, xi, abs_mean, c, g_buf, f_out):
    n = x.shape[0]
    for i in range(n):
        m = np.exp(0.5 * x[i])
        g_buf[i] = theta0 * sgn[i] * m + xi * (m - abs_mean)
    f = a_mat @ x + rho0 * (w1 @ g_buf) - c
    worst = 0.0
    for i in range(n):
        f_out[i] = f[i]
        if not np.isfinite(f[i]):
            return np.inf
        if abs(f[i]) > worst:
            worst = abs(f[i])
    return worst


@njit(cache=True)
def newton_step_solve(x0, sgn, a_mat, w1, rho0, theta0, xi, abs_mean, c, tol, max_iter):
    """
    Solve A x + rho0 W1 g(x) = c for x = ln eps^2 with signs fixed.

    Returns (x, iterations, final residual max-norm, log|det J|, status).
    """
    n = x0.shape[0]
    x = x0.copy()
    g_buf = np.empty(n)
    f = np.empty(n)
    f_try = np.empty(n)
    x_try = np.empty(n)
    jac = np.empty((n, n))
    res = _residual(x, sgn, a_mat, w1, rho0, theta0, xi, abs_mean, c, g_buf, f)
    it = 0
    status = NO_CONVERGENCE
    while True:
        # Jacobian is needed at the solution as well, for the likelihood.
        for i in range(n):
            d = 0.5 * np.exp(0.5 * x[i]) * (theta0 * sgn[i] + xi)
            for k in range(n):
                jac[k, i] = a_mat[k, i] + rho0 * w1[k, i] * d
        if res <= tol:
            status = OK
            break
        if it >= max_iter or not np.isfinite(res):
            status = NON_FINITE if not np.isfinite(res) else NO_CONVERGENCE
            break
        dx = np.linalg.solve(jac, -f)
        step = 1.0
        accepted = False
        for _ in range(40):
            for i in range(n):
                v = x[i] + step * dx[i]
                x_try[i] = min(max(v, X_MIN), X_MAX)
            res_try = _residual(x_try, sgn, a_mat, w1, rho0, theta0, xi, abs_mean, c, g_buf, f_try)
            if res_try < res or res_try <= tol:
                accepted = True
                break
            step *= 0.5
        it += 1
        if not accepted:
            status = NO_CONVERGENCE
            break
        for i in range(n):
            x[i] = x_try[i]
            f[i] = f_try[i]
        res = res_try
    sign_det, logdet = np.linalg.slogdet(jac)
    if status == OK and sign_det == 0.0:
        status = SINGULAR
    return x, it, res, logdet, status


@njit(cache=True)
def invert_series(log_y2, sgn, eps0, log_h0, alpha, rho0, rho1, lam0, lam1, theta0, theta1,
                  xi, abs_mean, w1, w2, tol, max_iter):
    """
    Sequential Newton inversion over all time points.

    Returns (x = ln eps~^2 (T, n), iterations (T,), residuals (T,),
    log|det J_newton| (T,), status, failing index or -1).
    """
    t_len, n = log_y2.shape
    a_mat = np.eye(n) - lam0 * w2
    s_mat = np.linalg.inv(a_mat)
    xs = np.empty((t_len, n))
    iters = np.zeros(t_len, dtype=np.int64)
    resid = np.zeros(t_len)
    logdets = np.zeros(t_len)
    prev_log_h = log_h0.copy()
    prev_eps = eps0.copy()
    c = np.empty(n)
    b = np.empty(n)
    x0 = np.empty(n)
    for t in range(t_len):
        for i in range(n):
            b[i] = alpha + rho1 * g_scalar(prev_eps[i], theta1, xi, abs_mean) + lam1 * prev_log_h[i]
        ay = a_mat @ log_y2[t]
        for i in range(n):
            c[i] = ay[i] - b[i]
        # start from ln y^2 minus the volatility predicted without the
        # contemporaneous shock term
        pred = s_mat @ b
        for i in range(n):
            x0[i] = min(max(log_y2[t, i] - pred[i], X_MIN), X_MAX)
        x, it, res, logdet, status = newton_step_solve(
            x0, sgn[t], a_mat, w1, rho0, theta0, xi, abs_mean, c, tol, max_iter
        )
        xs[t] = x
        iters[t] = it
        resid[t] = res
        logdets[t] = logdet
        if status != OK:
            return xs, iters, resid, logdets, status, t
        for i in range(n):
            prev_log_h[i] = log_y2[t, i] - x[i]
            prev_eps[i] = sgn[t, i] * np.exp(0.5 * x[i])
    return xs, iters, resid, logdets, OK, -1


@njit(cache=True)
def log_likelihood_kernel(log_y2, sgn, eps0, log_h0, alpha, rho0, rho1, lam0, lam1, theta0,
                          theta1, xi, abs_mean, w1, w2, tol, max_iter, burn):
    """
    Conditional Gaussian quasi log-likelihood summed over t >= burn.

    Returns (loglik, status).  The per-step Jacobian determinant is
    prod sqrt(h) * det(J_newton) / det(I - lam0 W2).
    """
    t_len, n = log_y2.shape
    xs, iters, resid, logdets, status, fail = invert_series(
        log_y2, sgn, eps0, log_h0, alpha, rho0, rho1, lam0, lam1, theta0, theta1, xi,
        abs_mean, w1, w2, tol, max_iter,
    )
    if status != OK:
        return -np.inf, status
    sign_a, logdet_a = np.linalg.slogdet(np.eye(n) - lam0 * w2)
    const = -0.5 * n * np.log(2.0 * np.pi)
    total = 0.0
    for t in range(burn, t_len):
        s = const - logdets[t] + logdet_a
        for i in range(n):
            x = xs[t, i]
            # eps^2 = exp(x); ln h = ln y^2 - x
            s += -0.5 * np.exp(x) - 0.5 * (log_y2[t, i] - x)
        total += s
    if not np.isfinite(total):
        return -np.inf, NON_FINITE
    return total, OK
