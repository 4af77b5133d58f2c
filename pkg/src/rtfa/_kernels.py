"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin with the same signature.  The numba path
is used by default; set ``RTFA_DISABLE_NUMBA=1`` before import to force the
numpy path (useful for debugging and for the benchmark in ``benchmarks/``).
"""

import os

import numpy as np

_DISABLED = os.environ.get("RTFA_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLED


# --------------------------------------------------------------------------
# coordinate descent lasso, residual form
# --------------------------------------------------------------------------

def _cd_lasso_numpy(B, y, x, weights, col_sq, max_sweeps, tol):
    """Cyclic coordinate descent on 0.5*||y - Bx||^2 + sum_i weights[i]*|x_i|.

    ``x`` is updated in place.  Stops when the largest optimality violation
    seen during a full sweep drops below ``tol``.  Returns the sweep count.
    """
    n = B.shape[1]
    r = y - B @ x
    for sweep in range(1, max_sweeps + 1):
        worst = 0.0
        for i in range(n):
            if col_sq[i] == 0.0:
                continue
            bi = B[:, i]
            g = bi @ r
            xi = x[i]
            if xi > 0.0:
                v = abs(g - weights[i])
            elif xi < 0.0:
                v = abs(g + weights[i])
            else:
                v = max(abs(g) - weights[i], 0.0)
            if v > worst:
                worst = v
            rho = g + col_sq[i] * xi
            if rho > weights[i]:
                new = (rho - weights[i]) / col_sq[i]
            elif rho < -weights[i]:
                new = (rho + weights[i]) / col_sq[i]
            else:
                new = 0.0
            d = new - xi
            if d != 0.0:
                r -= d * bi
                x[i] = new
        if worst <= tol:
            return sweep
    return max_sweeps


def _cd_lasso_loops(B, y, x, weights, col_sq, max_sweeps, tol):
    m, n = B.shape
    r = np.empty(m)
    for k in range(m):
        acc = y[k]
        for i in range(n):
            acc -= B[k, i] * x[i]
        r[k] = acc
    for sweep in range(1, max_sweeps + 1):
        worst = 0.0
        for i in range(n):
            if col_sq[i] == 0.0:
                continue
            g = 0.0
            for k in range(m):
                g += B[k, i] * r[k]
            xi = x[i]
            w = weights[i]
            if xi > 0.0:
                v = abs(g - w)
            elif xi < 0.0:
                v = abs(g + w)
            else:
                v = abs(g) - w
                if v < 0.0:
                    v = 0.0
            if v > worst:
                worst = v
            rho = g + col_sq[i] * xi
            if rho > w:
                new = (rho - w) / col_sq[i]
            elif rho < -w:
                new = (rho + w) / col_sq[i]
            else:
                new = 0.0
            d = new - xi
            if d != 0.0:
                for k in range(m):
                    r[k] -= d * B[k, i]
                x[i] = new
        if worst <= tol:
            return sweep
    return max_sweeps


# --------------------------------------------------------------------------
# truncated correlation maxima
# --------------------------------------------------------------------------

def _trunc_corr_max_numpy(cp, cq, n_shift_p, n_shift_q, length, start):
    """max over 0<=s<n_shift_p, 0<=t<n_shift_q, 0<=m<length of
    |sum_{n=start}^{start+m-1} cp[(n-s) % p] * cq[(n-t) % q]|."""
    p = cp.shape[0]
    q = cq.shape[0]
    n = np.arange(start, start + length - 1)
    if n.size == 0:
        return 0.0
    a = cp[(n[None, :] - np.arange(n_shift_p)[:, None]) % p]
    b = cq[(n[None, :] - np.arange(n_shift_q)[:, None]) % q]
    prod = a[:, None, :] * b[None, :, :]
    partial = np.cumsum(prod, axis=2)
    return float(np.abs(partial).max())


def _trunc_corr_max_loops(cp, cq, n_shift_p, n_shift_q, length, start):
    p = cp.shape[0]
    q = cq.shape[0]
    best = 0.0
    for s in range(n_shift_p):
        for t in range(n_shift_q):
            acc = 0.0
            for j in range(length - 1):
                n = start + j
                acc += cp[(n - s) % p] * cq[(n - t) % q]
                a = abs(acc)
                if a > best:
                    best = a
    return best


if USE_NUMBA:
    cd_lasso = numba.njit(cache=True)(_cd_lasso_loops)
    trunc_corr_max = numba.njit(cache=True)(_trunc_corr_max_loops)
else:
    cd_lasso = _cd_lasso_numpy
    trunc_corr_max = _trunc_corr_max_numpy


def backend():
    return "numba" if USE_NUMBA else "numpy"
