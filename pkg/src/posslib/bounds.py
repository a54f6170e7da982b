"""Maxitive posterior, log-consistency and the consistency bounds (CBOs).

For a loss ``l`` and a prior possibility function ``pi`` on a grid, the
log-consistency is ``log Z_max = max_theta (-l(theta) + log pi(theta))`` and
the maxitive posterior is ``g* = exp(-l) pi / Z_max``.  For any candidate
possibility function ``g``::

    lower_cbo(g) = inf_theta {-l(theta) - log(g(theta) / pi(theta))}
    upper_cbo(g) = sup_theta {-l(theta) - log(g(theta) / pi(theta))}

bracket ``log Z_max`` and differ from it by max-relative entropies.

Extended-real conventions at zeros (``h = -l + log pi``):

* lower: points with ``g = 0`` contribute ``+inf``; otherwise a point with
  ``h = -inf`` (``pi = 0`` or ``l = +inf``) contributes ``-inf``.
* upper: points with ``h = -inf`` contribute ``-inf``; otherwise a point with
  ``g = 0`` contributes ``+inf``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import DiscretePossibility, Grid, _check_same_grid
from .errors import BadAlpha, GridMismatch, Inconsistent, NonFinite


@dataclass(frozen=True, eq=False)
class LossOnGrid:
    """Loss values on a grid; ``+inf`` is a hard exclusion, ``-inf`` and NaN are rejected."""

    grid: Grid
    loss: np.ndarray

    def __post_init__(self):
        v = np.array(self.loss, dtype=np.float64).reshape(-1)
        if v.shape[0] != self.grid.size:
            raise ValueError(f"{v.shape[0]} loss values for a grid of {self.grid.size} points")
        if np.any(np.isnan(v)) or np.any(v == -np.inf):
            raise NonFinite("loss may not be NaN or -inf")
        if not np.any(np.isfinite(v)):
            raise NonFinite("loss needs at least one finite entry")
        v.setflags(write=False)
        object.__setattr__(self, "loss", v)

    @classmethod
    def zero(cls, grid: Grid) -> "LossOnGrid":
        return cls(grid, np.zeros(grid.size))

    @property
    def has_negative(self) -> bool:
        return bool(np.any(self.loss < 0))


def log_target(loss: LossOnGrid, prior: DiscretePossibility) -> np.ndarray:
    """``-loss + log prior`` with ``exp(-inf) * pi = 0`` mapped to ``-inf``."""
    if not loss.grid.same_as(prior.grid):
        raise GridMismatch("loss and prior live on different grids")
    return -loss.loss + prior.log_values


def log_z_max(loss: LossOnGrid, prior: DiscretePossibility) -> float:
    return float(np.max(log_target(loss, prior)))


def maxitive_posterior(loss: LossOnGrid, prior: DiscretePossibility) -> tuple[DiscretePossibility, float]:
    """Return ``(g*, log Z_max)``.

    Raises :class:`Inconsistent` when the prior and the likelihood have
    disjoint supports.
    """
    h = log_target(loss, prior)
    log_z = float(np.max(h))
    if log_z == -np.inf:
        raise Inconsistent("prior and likelihood are in total conflict (Z_max = 0)")
    # multiplicative form keeps the prior bit-exact under constant losses;
    # the log form covers priors small enough for the factor to overflow
    pi = prior.values
    with np.errstate(over="ignore", invalid="ignore"):
        post = np.where(pi > 1e-300, pi * np.exp(-loss.loss - log_z), np.exp(h - log_z))
    post[h == log_z] = 1.0
    np.minimum(post, 1.0, out=post)
    return DiscretePossibility(prior.grid, post), log_z


def _stack(gs, grid: Grid) -> np.ndarray:
    """Log-values of one or many candidates as an ``(m, n)`` array."""
    if isinstance(gs, DiscretePossibility):
        if not gs.grid.same_as(grid):
            raise GridMismatch("candidate lives on a different grid")
        return gs.log_values[None, :]
    if isinstance(gs, np.ndarray):
        if gs.ndim != 2 or gs.shape[1] != grid.size:
            raise GridMismatch(f"candidate array of shape {gs.shape} for grid of {grid.size}")
        return _kernels.safe_log(gs)
    for g in gs:
        if not g.grid.same_as(grid):
            raise GridMismatch("candidate lives on a different grid")
    return np.stack([g.log_values for g in gs])


def d_max(g: DiscretePossibility, f: DiscretePossibility) -> float:
    """Max-relative entropy ``sup_theta log(g(theta) / f(theta))``."""
    _check_same_grid(g, f)
    return float(_kernels.dmax_rows(g.log_values, f.log_values)[0])


def d_max_batch(gs, f: DiscretePossibility, reverse: bool = False) -> np.ndarray:
    """``D_max(g_i || f)`` for each candidate, or ``D_max(f || g_i)`` if ``reverse``."""
    lg = _stack(gs, f.grid)
    lf = np.broadcast_to(f.log_values, lg.shape)
    return _kernels.dmax_rows(lf, lg) if reverse else _kernels.dmax_rows(lg, lf)


def lower_cbo(g: DiscretePossibility, loss: LossOnGrid, prior: DiscretePossibility) -> float:
    _check_same_grid(g, prior)
    return float(_kernels.lower_rows(log_target(loss, prior), g.log_values)[0])


def upper_cbo(g: DiscretePossibility, loss: LossOnGrid, prior: DiscretePossibility) -> float:
    _check_same_grid(g, prior)
    return float(_kernels.upper_rows(log_target(loss, prior), g.log_values)[0])


def lower_cbo_batch(gs, loss: LossOnGrid, prior: DiscretePossibility) -> np.ndarray:
    """Lower CBO for a sequence of candidates, or an ``(m, n)`` value array."""
    return _kernels.lower_rows(log_target(loss, prior), _stack(gs, prior.grid))


def upper_cbo_batch(gs, loss: LossOnGrid, prior: DiscretePossibility) -> np.ndarray:
    return _kernels.upper_rows(log_target(loss, prior), _stack(gs, prior.grid))


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise BadAlpha(f"alpha must lie in (0, 1), got {alpha}")


def _sandwich(upper, lower, alpha):
    return alpha * upper - (1.0 - alpha) * lower


def sandwich_objective(g: DiscretePossibility, loss: LossOnGrid, prior: DiscretePossibility, alpha: float) -> float:
    """``alpha * upper_cbo(g) - (1 - alpha) * lower_cbo(g)``; uniquely minimised at ``g*``."""
    _check_alpha(alpha)
    return float(_sandwich(upper_cbo(g, loss, prior), lower_cbo(g, loss, prior), alpha))


def sandwich_objective_batch(gs, loss, prior, alpha: float) -> np.ndarray:
    _check_alpha(alpha)
    h = log_target(loss, prior)
    lg = _stack(gs, prior.grid)
    return _sandwich(_kernels.upper_rows(h, lg), _kernels.lower_rows(h, lg), alpha)


def _ext(x):
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _from_ext(x):
    if x is None:
        return None
    return float(x) if isinstance(x, str) else x


@dataclass(frozen=True)
class CboReport:
    lower_cbo: float
    upper_cbo: float
    log_z_max: float
    d_max_g_to_gstar: float
    d_max_gstar_to_g: float
    alpha: float | None = None
    sandwich_value: float | None = None

    def to_dict(self) -> dict:
        return {k: _ext(getattr(self, k)) for k in self.__dataclass_fields__}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "CboReport":
        return cls(**{k: _from_ext(d.get(k)) for k in cls.__dataclass_fields__})


def cbo_report(g: DiscretePossibility, loss: LossOnGrid, prior: DiscretePossibility, alpha: float | None = None) -> CboReport:
    _check_same_grid(g, prior)
    if alpha is not None:
        _check_alpha(alpha)
    gstar, log_z = maxitive_posterior(loss, prior)
    lo = lower_cbo(g, loss, prior)
    up = upper_cbo(g, loss, prior)
    return CboReport(
        lower_cbo=lo,
        upper_cbo=up,
        log_z_max=log_z,
        d_max_g_to_gstar=d_max(g, gstar),
        d_max_gstar_to_g=d_max(gstar, g),
        alpha=alpha,
        sandwich_value=None if alpha is None else float(_sandwich(up, lo, alpha)),
    )
