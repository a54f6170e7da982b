"""Grid-sweep reductions with extended-real conventions.

Every kernel exists twice: a numba ``@njit`` loop and a vectorised numpy
version.  The numba path is used when numba imports and ``POSSLIB_JIT`` is
not set to ``0``.  Elementwise logarithms are always taken by the caller in
numpy, so both paths see identical inputs and return bit-identical results
(the reductions are only subtraction, min and max).

Inputs are log-values: ``h`` is the log-target ``-loss + log prior`` of shape
``(n,)`` and ``lg`` the log-candidates of shape ``(m, n)``.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_OFF = {"0", "false", "no", "off"}
USE_NUMBA = numba is not None and os.environ.get("POSSLIB_JIT", "1").strip().lower() not in _OFF

NEG_INF = -np.inf
POS_INF = np.inf


# ---------------------------------------------------------------------------
# numpy reference path


def lower_rows_np(h, lg):
    with np.errstate(invalid="ignore"):
        t = h[None, :] - lg
    t = np.where(h[None, :] == NEG_INF, NEG_INF, t)
    t = np.where(lg == NEG_INF, POS_INF, t)
    return t.min(axis=1)


def upper_rows_np(h, lg):
    with np.errstate(invalid="ignore"):
        t = h[None, :] - lg
    t = np.where(lg == NEG_INF, POS_INF, t)
    t = np.where(np.broadcast_to(h[None, :] == NEG_INF, t.shape), NEG_INF, t)
    return t.max(axis=1)


def dmax_rows_np(la, lb):
    with np.errstate(invalid="ignore"):
        t = la - lb
    t = np.where(lb == NEG_INF, POS_INF, t)
    t = np.where(la == NEG_INF, NEG_INF, t)
    return t.max(axis=1)


def leq_rows_np(f, g, tol):
    return np.all(f <= g + tol, axis=1)


# ---------------------------------------------------------------------------
# numba path

if numba is not None:

    @numba.njit(cache=True, nogil=True)
    def lower_rows_nb(h, lg):
        m, n = lg.shape
        out = np.empty(m)
        for i in range(m):
            best = np.inf
            for j in range(n):
                if lg[i, j] == -np.inf:
                    continue  # g = 0: +inf term, never the infimum
                if h[j] == -np.inf:
                    best = -np.inf
                    break
                v = h[j] - lg[i, j]
                if v < best:
                    best = v
            out[i] = best
        return out

    @numba.njit(cache=True, nogil=True)
    def upper_rows_nb(h, lg):
        m, n = lg.shape
        out = np.empty(m)
        for i in range(m):
            best = -np.inf
            for j in range(n):
                if h[j] == -np.inf:
                    continue  # excluded point
                if lg[i, j] == -np.inf:
                    best = np.inf
                    break
                v = h[j] - lg[i, j]
                if v > best:
                    best = v
            out[i] = best
        return out

    @numba.njit(cache=True, nogil=True)
    def dmax_rows_nb(la, lb):
        m, n = la.shape
        out = np.empty(m)
        for i in range(m):
            best = -np.inf
            for j in range(n):
                if la[i, j] == -np.inf:
                    continue
                if lb[i, j] == -np.inf:
                    best = np.inf
                    break
                v = la[i, j] - lb[i, j]
                if v > best:
                    best = v
            out[i] = best
        return out

    @numba.njit(cache=True, nogil=True)
    def leq_rows_nb(f, g, tol):
        m, n = f.shape
        out = np.empty(m, dtype=np.bool_)
        for i in range(m):
            ok = True
            for j in range(n):
                if f[i, j] > g[i, j] + tol:
                    ok = False
                    break
            out[i] = ok
        return out


def _rows(a, n):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    return np.ascontiguousarray(a) if a.shape[1] == n else a


def lower_rows(h, lg):
    """Row-wise ``inf_j (h_j - lg_ij)``; ``lg = -inf`` points are dropped."""
    h = np.ascontiguousarray(h, dtype=np.float64)
    lg = _rows(lg, h.shape[0])
    if USE_NUMBA:
        return lower_rows_nb(h, lg)
    return lower_rows_np(h, lg)


def upper_rows(h, lg):
    """Row-wise ``sup_j (h_j - lg_ij)``; ``h = -inf`` points are dropped."""
    h = np.ascontiguousarray(h, dtype=np.float64)
    lg = _rows(lg, h.shape[0])
    if USE_NUMBA:
        return upper_rows_nb(h, lg)
    return upper_rows_np(h, lg)


def dmax_rows(la, lb):
    """Row-wise ``sup_j (la_ij - lb_ij)`` with ``0/0`` ignored and ``c/0 = +inf``."""
    la = np.atleast_2d(np.asarray(la, dtype=np.float64))
    lb = np.atleast_2d(np.asarray(lb, dtype=np.float64))
    la, lb = np.broadcast_arrays(la, lb)
    la, lb = np.ascontiguousarray(la), np.ascontiguousarray(lb)
    if USE_NUMBA:
        return dmax_rows_nb(la, lb)
    return dmax_rows_np(la, lb)


def leq_rows(f, g, tol):
    f = np.atleast_2d(np.asarray(f, dtype=np.float64))
    g = np.atleast_2d(np.asarray(g, dtype=np.float64))
    f, g = np.broadcast_arrays(f, g)
    f, g = np.ascontiguousarray(f), np.ascontiguousarray(g)
    if USE_NUMBA:
        return leq_rows_nb(f, g, float(tol))
    return leq_rows_np(f, g, float(tol))


def safe_log(x):
    """Natural log with ``log(0) = -inf`` and no warnings."""
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(x, dtype=np.float64))
