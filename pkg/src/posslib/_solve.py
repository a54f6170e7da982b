"""Bounded maximisation of smooth objectives: coarse grid, then damped Newton."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._numdiff import fd_gradient, fd_hessian
from .errors import NoConvergence, Unbounded


@dataclass(frozen=True)
class SolveConfig:
    grid_points: int = 401
    search_radius: float = 10.0
    max_radius: float = 1e6
    max_iters: int = 100
    grad_tol: float = 1e-10
    blowup: float = 1e8
    tie_tol: float = 1e-9


@dataclass(frozen=True)
class MaxResult:
    x: np.ndarray
    value: float
    converged: bool
    iterations: int
    tie: bool = False


def _safe(obj, x):
    try:
        v = float(obj(x))
    except (ValueError, FloatingPointError, OverflowError):
        return -np.inf
    return -np.inf if np.isnan(v) else v


def _grid_start(obj, lower, upper, center, cfg: SolveConfig, unbounded):
    """1-D grid search that widens until the best point is interior."""
    radius = cfg.search_radius
    while True:
        lo = max(lower[0], center - radius)
        hi = min(upper[0], center + radius)
        xs = np.linspace(lo, hi, cfg.grid_points)
        vals = np.array([_safe(obj, np.array([x])) for x in xs])
        best = int(np.argmax(vals))
        if vals[best] == np.inf:
            raise unbounded("objective is +inf on the search grid")
        hits_lo = best == 0 and lo > lower[0]
        hits_hi = best == len(xs) - 1 and hi < upper[0]
        if not (hits_lo or hits_hi):
            return xs, vals, best
        if radius >= cfg.max_radius:
            raise unbounded(f"maximiser escapes the search interval of radius {radius:g}")
        radius *= 8.0


def _clusters(vals, tol):
    """Contiguous runs of grid indices whose value is within ``tol`` of the max."""
    near = np.flatnonzero(vals >= vals.max() - tol)
    runs = np.split(near, np.flatnonzero(np.diff(near) > 1) + 1)
    return [r[np.argmax(vals[r])] for r in runs]


def maximize(
    obj,
    lower,
    upper,
    *,
    grad=None,
    hess=None,
    x0=None,
    reference=None,
    use_grid=True,
    config: SolveConfig = SolveConfig(),
    unbounded=Unbounded,
    no_convergence=NoConvergence,
) -> MaxResult:
    """Maximise ``obj`` over the box ``[lower, upper]`` (bounds may be infinite).

    For 1-D problems a coarse grid locates the basin first; if several
    separated grid maximisers tie (within ``tie_tol``) the one closest to
    ``reference`` is polished and ``tie`` is set.  Divergence of the iterates
    beyond ``blowup`` raises ``unbounded``.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=np.float64))
    upper = np.atleast_1d(np.asarray(upper, dtype=np.float64))
    d = lower.size
    if grad is None:
        grad = lambda x: fd_gradient(obj, x)  # noqa: E731
    if hess is None:
        hess = lambda x: fd_hessian(obj, x)  # noqa: E731

    tie = False
    if x0 is None:
        x0 = np.zeros(d)
    x = np.clip(np.atleast_1d(np.asarray(x0, dtype=np.float64)), lower, upper)
    if use_grid and d == 1:
        xs, vals, best = _grid_start(obj, lower, upper, float(x[0]), config, unbounded)
        cands = _clusters(vals, config.tie_tol)
        if len(cands) > 1:
            tie = True
            ref = float(x[0] if reference is None else np.ravel(reference)[0])
            best = min(cands, key=lambda i: abs(xs[i] - ref))
        x = np.array([xs[best]])

    f = _safe(obj, x)
    if f == -np.inf:
        raise no_convergence(f"objective is not finite at the start point {x}")
    for it in range(config.max_iters + 1):
        g = np.atleast_1d(np.asarray(grad(x), dtype=np.float64))
        free = ~(((x <= lower) & (g < 0)) | ((x >= upper) & (g > 0)))
        gf = np.where(free, g, 0.0)
        if np.linalg.norm(gf) <= config.grad_tol:
            return MaxResult(x, f, True, it, tie)
        if it == config.max_iters:
            break
        H = np.atleast_2d(np.asarray(hess(x), dtype=np.float64))
        newton = True
        try:
            Hf = -H[np.ix_(free, free)]
            np.linalg.cholesky(Hf)
            step = np.zeros(d)
            step[free] = np.linalg.solve(Hf, g[free])
        except np.linalg.LinAlgError:
            newton = False
            step = gf
        t = 1.0
        accepted = False
        while t > 1e-16:
            xn = np.clip(x + t * step, lower, upper)
            fn = _safe(obj, xn)
            if fn == np.inf or np.linalg.norm(xn) > config.blowup:
                raise unbounded(f"iterates diverge (|x| = {np.linalg.norm(xn):.3g})")
            noise = 1e-14 * (1.0 + abs(f)) if newton else 0.0
            if fn > f or (fn >= f - noise and np.any(xn != x)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # line search stalled at machine precision
            if np.linalg.norm(gf) <= 1e-7 * (1.0 + abs(f)):
                return MaxResult(x, f, True, it, tie)
            raise no_convergence(f"line search failed with gradient norm {np.linalg.norm(gf):.3g}")
        if not newton and t == 1.0:
            # no curvature to trust: expand while the objective keeps improving
            while True:
                t *= 2.0
                xe = np.clip(x + t * step, lower, upper)
                fe = _safe(obj, xe)
                if fe == np.inf or np.linalg.norm(xe) > config.blowup:
                    raise unbounded(f"iterates diverge (|x| = {np.linalg.norm(xe):.3g})")
                if not fe > fn:
                    break
                xn, fn = xe, fe
        x, f = xn, fn
    raise no_convergence(f"no convergence after {config.max_iters} iterations (|grad| = {np.linalg.norm(gf):.3g})")
