"""Compiled inner loop of the Riemannian conjugate-gradient solver.

The solver spends nearly all its time in tiny dense products and elementwise
passes. The loops below are written in plain dot-product form on split
real/imag arrays: the per-multiplication cost is then uniform across problem
sizes, so wall time tracks the O(rows(A) * N * L) complex-multiplication
count of one iteration instead of being buried in per-call overhead.

Status codes returned by :func:`rcg_kernel`:
    0   gradient norm dropped below the tolerance
    1   iteration cap reached
    2   line search could not find decrease even along steepest descent
"""

import numpy as np
from numba import njit

STATUS_GRAD_TOL = 0
STATUS_ITER_CAP = 1
STATUS_STALLED = 2


@njit(cache=True)
def _matmul(ar, ai, br, bi, cr, ci):
    # c = a @ b
    m, n = ar.shape
    l = br.shape[1]
    for i in range(m):
        for j in range(l):
            sr = 0.0
            si = 0.0
            for p in range(n):
                sr += ar[i, p] * br[p, j] - ai[i, p] * bi[p, j]
                si += ar[i, p] * bi[p, j] + ai[i, p] * br[p, j]
            cr[i, j] = sr
            ci[i, j] = si


@njit(cache=True)
def _matmul_adjt(atr, ati, rr, ri, cr, ci):
    # c = a^H @ r, with a^T supplied as (n, m) for contiguous access
    n, m = atr.shape
    l = rr.shape[1]
    for p in range(n):
        for j in range(l):
            sr = 0.0
            si = 0.0
            for i in range(m):
                sr += atr[p, i] * rr[i, j] + ati[p, i] * ri[i, j]
                si += atr[p, i] * ri[i, j] - ati[p, i] * rr[i, j]
            cr[p, j] = sr
            ci[p, j] = si


@njit(cache=True, fastmath=True)
def _trial_point(xr, xi, dr, di, mu, yr, yi):
    # y = (x + mu d)/|x + mu d|; returns the smallest |.|^2 encountered
    x_r = xr.ravel()
    x_i = xi.ravel()
    d_r = dr.ravel()
    d_i = di.ravel()
    y_r = yr.ravel()
    y_i = yi.ravel()
    mmin = 1e300
    for t in range(x_r.size):
        u = x_r[t] + mu * d_r[t]
        v = x_i[t] + mu * d_i[t]
        m2 = u * u + v * v
        if m2 < mmin:
            mmin = m2
        inv = 1.0 / np.sqrt(m2)
        y_r[t] = u * inv
        y_i[t] = v * inv
    return mmin


@njit(cache=True, fastmath=True)
def _residual_value(pr, pi, br, bi, rr, ri):
    # r = p - b; returns ||r||^2
    p_r = pr.ravel()
    p_i = pi.ravel()
    b_r = br.ravel()
    b_i = bi.ravel()
    r_r = rr.ravel()
    r_i = ri.ravel()
    acc = 0.0
    for t in range(p_r.size):
        u = p_r[t] - b_r[t]
        v = p_i[t] - b_i[t]
        r_r[t] = u
        r_i[t] = v
        acc += u * u + v * v
    return acc


@njit(cache=True, fastmath=True)
def _project_scaled(xr, xi, gr, gi, scale):
    # g <- P_x(scale * g); returns ||g||^2
    x_r = xr.ravel()
    x_i = xi.ravel()
    g_r = gr.ravel()
    g_i = gi.ravel()
    acc = 0.0
    for t in range(x_r.size):
        u = scale * g_r[t]
        v = scale * g_i[t]
        dot = u * x_r[t] + v * x_i[t]
        u -= dot * x_r[t]
        v -= dot * x_i[t]
        g_r[t] = u
        g_i[t] = v
        acc += u * u + v * v
    return acc


@njit(cache=True, fastmath=True)
def _project_scaled_beta(xr, xi, gr, gi, hr, hi, scale):
    # g <- P_x(scale * g); returns (||g||^2, <g, g - P_x h>) with h the
    # previous gradient, transported by projection for the Polak-Ribiere rule
    x_r = xr.ravel()
    x_i = xi.ravel()
    g_r = gr.ravel()
    g_i = gi.ravel()
    h_r = hr.ravel()
    h_i = hi.ravel()
    acc = 0.0
    num = 0.0
    for t in range(x_r.size):
        u = scale * g_r[t]
        v = scale * g_i[t]
        dot = u * x_r[t] + v * x_i[t]
        u -= dot * x_r[t]
        v -= dot * x_i[t]
        g_r[t] = u
        g_i[t] = v
        acc += u * u + v * v
        dh = h_r[t] * x_r[t] + h_i[t] * x_i[t]
        num += u * (u - h_r[t] + dh * x_r[t]) + v * (v - h_i[t] + dh * x_i[t])
    return acc, num


@njit(cache=True, fastmath=True)
def _direction_update(xr, xi, gr, gi, beta, dr, di):
    # d <- -g + beta * P_x d; returns the slope <g, d>
    x_r = xr.ravel()
    x_i = xi.ravel()
    g_r = gr.ravel()
    g_i = gi.ravel()
    d_r = dr.ravel()
    d_i = di.ravel()
    acc = 0.0
    for t in range(x_r.size):
        dot = d_r[t] * x_r[t] + d_i[t] * x_i[t]
        u = -g_r[t] + beta * (d_r[t] - dot * x_r[t])
        v = -g_i[t] + beta * (d_i[t] - dot * x_i[t])
        d_r[t] = u
        d_i[t] = v
        acc += g_r[t] * u + g_i[t] * v
    return acc


@njit(cache=True, fastmath=True)
def _steepest(gr, gi, dr, di):
    g_r = gr.ravel()
    g_i = gi.ravel()
    d_r = dr.ravel()
    d_i = di.ravel()
    for t in range(g_r.size):
        d_r[t] = -g_r[t]
        d_i[t] = -g_i[t]


@njit(cache=True)
def rcg_kernel(ar0, ai0, br, bi, amp, x0r, x0i, eps, k_max, armijo_c, shrink,
               step_scale, max_backtracks, trace):
    """Conjugate-gradient descent of ||amp * A X - B||_F^2 over unit-modulus X.

    Iterates: Polak-Ribiere(+) direction with projection transport, Armijo
    backtracking, retraction to the manifold. The first Armijo trial reuses
    the previously accepted step (grown by one shrink factor); the very first
    iteration starts from step_scale / ||grad||.

    Returns (x_re, x_im, iterations, grad_norm, status, n_trials); trace must
    have room for k_max + 1 objective values, trace[:iterations+1] is filled.
    """
    m, n = ar0.shape
    l = br.shape[1]
    ar = amp * ar0
    ai = amp * ai0
    atr = ar.T.copy()
    ati = ai.T.copy()
    xr = x0r.copy()
    xi = x0i.copy()
    xnr = np.empty((n, l))
    xni = np.empty((n, l))
    pr = np.empty((m, l))
    pi = np.empty((m, l))
    rr = np.empty((m, l))
    ri = np.empty((m, l))
    gr = np.empty((n, l))
    gi = np.empty((n, l))
    hr = np.empty((n, l))
    hi = np.empty((n, l))
    dr = np.empty((n, l))
    di = np.empty((n, l))
    eps2 = eps * eps

    _matmul(ar, ai, xr, xi, pr, pi)
    f = _residual_value(pr, pi, br, bi, rr, ri)
    _matmul_adjt(atr, ati, rr, ri, gr, gi)
    gnorm2 = _project_scaled(xr, xi, gr, gi, 2.0)
    _steepest(gr, gi, dr, di)
    slope = -gnorm2
    trace[0] = f
    k = 0
    status = STATUS_GRAD_TOL
    n_trials = 0
    mu_prev = -1.0
    while k < k_max:
        if gnorm2 < eps2:
            break
        if slope >= 0.0:
            # safeguard restart: non-descent conjugate direction
            _steepest(gr, gi, dr, di)
            slope = -gnorm2
        restarted = False
        accepted = False
        fn = f
        if mu_prev > 0.0:
            mu = mu_prev / shrink
        else:
            mu = step_scale / np.sqrt(gnorm2)
        while True:
            for _ in range(max_backtracks + 1):
                mmin = _trial_point(xr, xi, dr, di, mu, xnr, xni)
                n_trials += 1
                if mmin > 1e-300:
                    _matmul(ar, ai, xnr, xni, pr, pi)
                    fn = _residual_value(pr, pi, br, bi, rr, ri)
                    if fn <= f + armijo_c * mu * slope:
                        accepted = True
                        break
                mu *= shrink
            if accepted or restarted:
                break
            # retry the whole search along steepest descent before giving up
            restarted = True
            _steepest(gr, gi, dr, di)
            slope = -gnorm2
            mu = step_scale / np.sqrt(gnorm2)
        if not accepted:
            status = STATUS_STALLED
            break
        mu_prev = mu
        xr, xnr = xnr, xr
        xi, xni = xni, xi
        f = fn
        hr, gr = gr, hr
        hi, gi = gi, hi
        # rr/ri hold the accepted residual; finish the gradient from it
        _matmul_adjt(atr, ati, rr, ri, gr, gi)
        gprev_norm2 = gnorm2
        gnorm2, num = _project_scaled_beta(xr, xi, gr, gi, hr, hi, 2.0)
        beta = num / gprev_norm2
        if beta < 0.0:
            beta = 0.0
        slope = _direction_update(xr, xi, gr, gi, beta, dr, di)
        k += 1
        trace[k] = f
    if k == k_max and gnorm2 >= eps2:
        status = STATUS_ITER_CAP
    return xr, xi, k, np.sqrt(gnorm2), status, n_trials
