"""Central finite differences."""

from __future__ import annotations

import numpy as np

from .errors import NonFinite


def _steps(x, step, rel):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if step is None:
        h = rel * (1.0 + np.abs(x))
    else:
        h = np.broadcast_to(np.asarray(step, dtype=np.float64), x.shape).copy()
    if np.any(h <= 0):
        raise ValueError("finite-difference step must be positive")
    return x, h


def _call(f, x):
    v = float(f(x))
    if not np.isfinite(v):
        raise NonFinite(f"function value {v} at {x}")
    return v


def fd_gradient(f, x, step=None):
    """Central-difference gradient of a scalar function.

    ``step`` defaults to ``1e-6 * (1 + |x_i|)`` per coordinate.
    """
    x, h = _steps(x, step, 1e-6)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        g[i] = (_call(f, x + e) - _call(f, x - e)) / (2.0 * h[i])
    return g


def fd_jacobian(fun, x, step=None):
    """Central-difference Jacobian of a vector function, ``J[i, j] = d fun_i / d x_j``."""
    x, h = _steps(x, step, 1e-6)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h[j]
        hi = np.atleast_1d(np.asarray(fun(x + e), dtype=np.float64))
        lo = np.atleast_1d(np.asarray(fun(x - e), dtype=np.float64))
        if not (np.all(np.isfinite(hi)) and np.all(np.isfinite(lo))):
            raise NonFinite(f"non-finite derivative evaluation near {x}")
        cols.append((hi - lo) / (2.0 * h[j]))
    return np.stack(cols, axis=1)


def fd_hessian(f, x, step=None):
    """Central-difference Hessian of a scalar function, symmetrised.

    ``step`` defaults to ``1e-4 * (1 + |x_i|)``.
    """
    x, h = _steps(x, step, 1e-4)
    d = x.size
    f0 = _call(f, x)
    H = np.empty((d, d))
    for i in range(d):
        ei = np.zeros_like(x)
        ei[i] = h[i]
        H[i, i] = (_call(f, x + ei) - 2.0 * f0 + _call(f, x - ei)) / h[i] ** 2
        for j in range(i + 1, d):
            ej = np.zeros_like(x)
            ej[j] = h[j]
            v = (
                _call(f, x + ei + ej)
                - _call(f, x + ei - ej)
                - _call(f, x - ei + ej)
                + _call(f, x - ei - ej)
            ) / (4.0 * h[i] * h[j])
            H[i, j] = H[j, i] = v
    return 0.5 * (H + H.T)
