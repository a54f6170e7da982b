"""Possibility functions on grids and the basic maxitive calculus.

A possibility function is a map into ``[0, 1]`` whose supremum is 1.  On a
finite grid it is stored as explicit point coordinates plus one value per
point.  Marginalisation and conditioning replace sums by maxima; the
possibilistic expectation is the (set-valued) argmax.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from ._numdiff import fd_gradient, fd_hessian, fd_jacobian
from .errors import (
    AllZero,
    BadAxis,
    GridMismatch,
    InvalidPossibility,
    NegativeValue,
    NonFinite,
    NotAtMode,
    SingularHessianWarning,
    ZeroMarginal,
)

NORM_TOL = 1e-12
TIE_TOL = 1e-12
ORDER_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Ordered, distinct parameter values.

    ``points`` has shape ``(n,)`` for scalar parameters or ``(n, d)`` for
    vector parameters.
    """

    points: np.ndarray
    label: str = "theta"

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 0:
            pts = pts.reshape(1)
        if pts.ndim not in (1, 2) or pts.shape[0] == 0:
            raise ValueError("grid needs at least one point, given as shape (n,) or (n, d)")
        if not np.all(np.isfinite(pts)):
            raise NonFinite("grid points must be finite")
        flat = pts if pts.ndim == 2 else pts[:, None]
        if np.unique(flat, axis=0).shape[0] != pts.shape[0]:
            raise ValueError("grid points must be distinct")
        object.__setattr__(self, "points", _readonly(pts))

    @classmethod
    def linspace(cls, start: float, stop: float, num: int, label: str = "theta") -> "Grid":
        return cls(np.linspace(start, stop, num), label)

    @classmethod
    def range(cls, n: int, label: str = "theta") -> "Grid":
        return cls(np.arange(n, dtype=np.float64), label)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return 1 if self.points.ndim == 1 else self.points.shape[1]

    def __len__(self) -> int:
        return self.size

    def point(self, i: int):
        p = self.points[i]
        return float(p) if self.points.ndim == 1 else tuple(float(v) for v in p)

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.points.shape == other.points.shape and np.array_equal(self.points, other.points)
        )

    def to_list(self) -> list:
        return self.points.tolist()


def _check_same_grid(f, g) -> None:
    if not f.grid.same_as(g.grid):
        raise GridMismatch("possibility functions live on different grids")


@dataclass(frozen=True, eq=False)
class DiscretePossibility:
    """A max-normalised possibility function on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.shape[0] != self.grid.size:
            raise ValueError(f"{v.shape[0]} values for a grid of {self.grid.size} points")
        if not np.all(np.isfinite(v)):
            raise NonFinite("possibility values must be finite")
        if np.any(v < 0):
            raise NegativeValue("possibility values must be non-negative")
        top = v.max()
        if abs(top - 1.0) > NORM_TOL:
            raise InvalidPossibility(f"max value is {top!r}, expected 1")
        np.minimum(v, 1.0, out=v)
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def uniform(cls, grid: Grid) -> "DiscretePossibility":
        """The fully uninformative possibility function (equal to 1 everywhere)."""
        return cls(grid, np.ones(grid.size))

    @cached_property
    def log_values(self) -> np.ndarray:
        return _readonly(_kernels.safe_log(self.values))

    def __len__(self) -> int:
        return self.grid.size

    def __call__(self, i: int) -> float:
        return float(self.values[i])

    def allclose(self, other: "DiscretePossibility", atol: float = 1e-12) -> bool:
        return self.grid.same_as(other.grid) and bool(np.all(np.abs(self.values - other.values) <= atol))

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_list(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict, label: str = "theta") -> "DiscretePossibility":
        return cls(Grid(d["grid"], label), d["values"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DiscretePossibility":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.grid.dim == 1 and self.grid.points.ndim == 1:
            w.writerow([self.grid.label, "value"])
            for p, v in zip(self.grid.points, self.values):
                w.writerow([repr(float(p)), repr(float(v))])
        else:
            w.writerow([f"{self.grid.label}_{k}" for k in range(self.grid.dim)] + ["value"])
            for p, v in zip(self.grid.points, self.values):
                w.writerow([repr(float(c)) for c in p] + [repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiscretePossibility":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        if header[-1] != "value":
            raise ValueError("last CSV column must be 'value'")
        data = np.array([[float(c) for c in r] for r in body], dtype=np.float64)
        label = header[0] if len(header) == 2 else header[0].rsplit("_", 1)[0]
        pts = data[:, 0] if len(header) == 2 else data[:, :-1]
        return cls(Grid(pts, label), data[:, -1])

    def save(self, path: str | Path) -> None:
        path = Path(path)
        text = self.to_csv() if path.suffix == ".csv" else self.to_json() + "\n"
        path.write_text(text, encoding="utf-8", newline="\n")

    @classmethod
    def load(cls, path: str | Path) -> "DiscretePossibility":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        return cls.from_csv(text) if path.suffix == ".csv" else cls.from_json(text)


@dataclass(frozen=True, eq=False)
class JointDiscretePossibility:
    """Joint possibility function over ``theta x psi``; rows index theta."""

    theta: Grid
    psi: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (self.theta.size, self.psi.size):
            raise ValueError(f"values of shape {v.shape}, expected {(self.theta.size, self.psi.size)}")
        if not np.all(np.isfinite(v)):
            raise NonFinite("possibility values must be finite")
        if np.any(v < 0):
            raise NegativeValue("possibility values must be non-negative")
        if abs(v.max() - 1.0) > NORM_TOL:
            raise InvalidPossibility(f"global max is {v.max()!r}, expected 1")
        np.minimum(v, 1.0, out=v)
        object.__setattr__(self, "values", _readonly(v))

    @property
    def axis_sizes(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def axis_labels(self) -> tuple[str, str]:
        return self.theta.label, self.psi.label

    def axis_index(self, axis) -> int:
        if axis in (0, "theta", self.theta.label):
            return 0
        if axis in (1, "psi", self.psi.label):
            return 1
        raise BadAxis(f"unknown axis {axis!r}")


@dataclass(frozen=True)
class ModeSet:
    """Argmax set of a possibility function.

    ``members`` holds grid indices when the set comes from a grid, otherwise
    the parameter values themselves; ``points`` always holds the values.
    """

    members: tuple
    points: tuple
    is_singleton: bool

    def as_set(self) -> frozenset:
        return frozenset(self.points)


@dataclass(frozen=True, eq=False)
class SmoothPossibility:
    """A possibility function given through its log on a continuous domain."""

    log_f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    hess: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, theta) -> float:
        v = float(np.exp(self.log_f(np.atleast_1d(np.asarray(theta, dtype=np.float64)))))
        if v > 1.0 + 1e-9:
            raise InvalidPossibility(f"possibility {v!r} exceeds 1 at {theta}")
        return v


def normal_possibility(mu, Sigma) -> SmoothPossibility:
    """``exp(-(theta - mu)^T Sigma^{-1} (theta - mu) / 2)`` with analytic derivatives."""
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    S = np.atleast_2d(np.asarray(Sigma, dtype=np.float64))
    P = np.linalg.inv(S)
    P = 0.5 * (P + P.T)

    def log_f(t):
        r = np.atleast_1d(t) - mu
        return -0.5 * float(r @ P @ r)

    return SmoothPossibility(
        log_f,
        grad=lambda t: -P @ (np.atleast_1d(t) - mu),
        hess=lambda t: -P,
    )


# ---------------------------------------------------------------------------
# operations


def normalize_max(raw_values: Sequence[float], grid: Grid) -> DiscretePossibility:
    v = np.array(raw_values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise NonFinite("values must be finite")
    if np.any(v < 0):
        raise NegativeValue("values must be non-negative")
    top = v.max() if v.size else 0.0
    if top <= 0:
        raise AllZero("at least one value must be positive")
    out = v / top
    out[v == top] = 1.0
    return DiscretePossibility(grid, out)


def marginalize(joint: JointDiscretePossibility, keep_axis) -> DiscretePossibility:
    """Maximise out the axis that is not kept."""
    k = joint.axis_index(keep_axis)
    if k == 0:
        return DiscretePossibility(joint.theta, joint.values.max(axis=1))
    return DiscretePossibility(joint.psi, joint.values.max(axis=0))


def condition(joint: JointDiscretePossibility, observed_axis, observed_index: int) -> DiscretePossibility:
    """Possibility of the other axis given the observed axis sits at ``observed_index``."""
    k = joint.axis_index(observed_axis)
    sl = joint.values[:, observed_index] if k == 1 else joint.values[observed_index, :]
    marginal = sl.max()
    if marginal <= 0:
        raise ZeroMarginal(f"observed slice {observed_index} has zero possibility")
    out = sl / marginal
    out[sl == marginal] = 1.0
    return DiscretePossibility(joint.theta if k == 1 else joint.psi, out)


def poss_expectation(f: DiscretePossibility) -> ModeSet:
    idx = np.flatnonzero(f.values >= f.values.max() - TIE_TOL)
    members = tuple(int(i) for i in idx)
    return ModeSet(members, tuple(f.grid.point(i) for i in members), len(members) == 1)


def transform_mode(f: DiscretePossibility, T: Callable) -> ModeSet:
    """Mode set of ``T(theta)``: the image under ``T`` of the mode set of ``theta``."""
    modes = poss_expectation(f)
    images: list = []
    for p in modes.points:
        y = T(p)
        y = float(y) if np.ndim(y) == 0 else tuple(float(c) for c in np.ravel(y))
        if y not in images:
            images.append(y)
    return ModeSet(tuple(images), tuple(images), len(images) == 1)


def precision_at_mode(f: SmoothPossibility, mode, fd_step=None) -> np.ndarray:
    """Negative Hessian of ``log f`` at a mode.

    Uses ``f.hess`` when present, else central differences (of ``f.grad``
    when present, otherwise of ``log f``) with step ``1e-4 * (1 + |mode|)``.
    Raises :class:`NotAtMode` if the gradient norm exceeds ``1e-6``; warns
    with :class:`SingularHessianWarning` when the result is not positive
    definite.
    """
    x = np.atleast_1d(np.asarray(mode, dtype=np.float64))
    step = 1e-4 * (1.0 + np.abs(x)) if fd_step is None else fd_step
    g = f.grad(x) if f.grad is not None else fd_gradient(f.log_f, x)
    gnorm = float(np.linalg.norm(np.atleast_1d(g)))
    if gnorm > 1e-6:
        raise NotAtMode(f"gradient norm {gnorm:.3g} at the proposed mode")
    if f.hess is not None:
        H = np.atleast_2d(np.asarray(f.hess(x), dtype=np.float64))
        floor = 1e-12
    elif f.grad is not None:
        H = fd_jacobian(f.grad, x, step)
        floor = 1e-6
    else:
        H = fd_hessian(f.log_f, x, step)
        floor = 1e-6
    P = -0.5 * (H + H.T)
    eig = np.linalg.eigvalsh(P)
    if eig.min() <= floor * max(1.0, float(np.abs(eig).max())):
        warnings.warn(
            f"precision is not positive definite (smallest eigenvalue {eig.min():.3g})",
            SingularHessianWarning,
            stacklevel=2,
        )
    return P


def leq(f: DiscretePossibility, g: DiscretePossibility) -> bool:
    """Partial order: ``f(theta) <= g(theta)`` everywhere (tolerance 1e-12)."""
    _check_same_grid(f, g)
    return bool(np.all(f.values <= g.values + ORDER_TOL))


def join(f: DiscretePossibility, g: DiscretePossibility) -> DiscretePossibility:
    """Least upper bound ``f v g`` (pointwise max)."""
    _check_same_grid(f, g)
    return DiscretePossibility(f.grid, np.maximum(f.values, g.values))
