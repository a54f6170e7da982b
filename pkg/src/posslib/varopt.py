"""Maximising the lower CBO over a conjugate family.

For a regularised loss ``lbar`` (loss minus log prior, so that ``-lbar`` is
the log target) and a member ``g_lam`` of the conjugate family of ``B``::

    lower(lam) = A(lam) - sup_theta {lbar(theta) + lam^T theta - B(theta)}

where ``A`` is the family's log-partition and ``mode(lam) = grad A(lam)``.
Writing ``theta_hat`` for the inner maximiser, the exact step is::

    lam <- lam - rho * (mode(lam + grad lbar(theta_hat)) - mode(lam))

and the approximate step replaces the inner problem by the mode::

    lam <- lam - rho * I_lam^{-1} grad lbar(mode(lam))

with ``I_lam = hess B(mode(lam))`` the precision of ``g_lam``.  For the
normal and binomial families the approximate step reduces to plain gradient
steps on the loss written in the standard parameter, which
:func:`normal_step` and :func:`binomial_step` implement directly.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import expit

from ._numdiff import fd_gradient, fd_hessian
from ._solve import SolveConfig, maximize
from .errors import (
    BadParameter,
    BoundaryParameterWarning,
    ConsistencyError,
    DomainError,
    InnerNoConvergence,
    InnerUnbounded,
    MissingStandardForm,
    NonSingletonMode,
    SingularPrecision,
)
from .expfam import ExpFamilySpec, log_partition

P_EPS = 1e-9
DIVERGE_NORM = 1e12


# ---------------------------------------------------------------------------
# losses


@dataclass(frozen=True, eq=False)
class RegularisedLoss:
    """Natural-form loss ``lbar(theta)`` with an optional standard form ``lbar_s(mu)``.

    ``standard_map`` sends ``theta`` to the standard parameter ``mu`` and
    ``standard_jac`` is its Jacobian, so that by the chain rule
    ``grad lbar(theta) = J(theta)^T grad lbar_s(mu(theta))``.
    """

    value: Callable
    grad: Callable | None = None
    hess: Callable | None = None
    value_std: Callable | None = None
    grad_std: Callable | None = None
    standard_map: Callable | None = None
    standard_jac: Callable | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def has_standard_form(self) -> bool:
        return self.grad_std is not None

    def __call__(self, theta) -> float:
        return float(self.value(np.atleast_1d(np.asarray(theta, dtype=np.float64))))

    def gradient(self, theta) -> np.ndarray:
        x = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        if self.grad is not None:
            return np.atleast_1d(np.asarray(self.grad(x), dtype=np.float64))
        return fd_gradient(self, x)

    def hessian(self, theta) -> np.ndarray:
        x = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        if self.hess is not None:
            return np.atleast_2d(np.asarray(self.hess(x), dtype=np.float64))
        return fd_hessian(self, x)

    def chain_rule_residual(self, theta) -> float:
        if not (self.has_standard_form and self.standard_map and self.standard_jac):
            raise MissingStandardForm(f"loss {self.name!r} has no standard form")
        x = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        J = np.atleast_2d(self.standard_jac(x))
        lhs = self.gradient(x)
        rhs = J.T @ np.atleast_1d(self.grad_std(np.atleast_1d(self.standard_map(x))))
        return float(np.max(np.abs(lhs - rhs) / (1.0 + np.abs(lhs))))

    def check_chain_rule(self, points, tol: float = 1e-6) -> float:
        """Worst relative chain-rule residual over ``points``; raises beyond ``tol``."""
        worst = max(self.chain_rule_residual(p) for p in points)
        if worst > tol:
            raise ConsistencyError(f"natural and standard loss gradients disagree by {worst:.3g}")
        return worst


def zero_loss(dim: int = 1) -> RegularisedLoss:
    return RegularisedLoss(
        value=lambda t: 0.0,
        grad=lambda t: np.zeros(dim),
        hess=lambda t: np.zeros((dim, dim)),
        name="zero",
        params={"dim": dim},
    )


def _spd(M, what) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if M.shape[0] != M.shape[1] or not np.allclose(M, M.T, atol=1e-12):
        raise BadParameter(f"{what} must be a symmetric matrix")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise BadParameter(f"{what} must be positive definite") from None
    return M


def quadratic_loss(Q, c) -> RegularisedLoss:
    """``(theta - c)^T Q (theta - c) / 2`` in the natural parameter."""
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    c = np.atleast_1d(np.asarray(c, dtype=np.float64))
    return RegularisedLoss(
        value=lambda t: 0.5 * float((t - c) @ Q @ (t - c)),
        grad=lambda t: Q @ (t - c),
        hess=lambda t: Q,
        name="quadratic",
        params={"Q": Q.tolist(), "c": c.tolist()},
    )


def quadratic_standard_loss(Q, m, Sigma) -> RegularisedLoss:
    """``(mu - m)^T Q (mu - m) / 2`` with ``mu = Sigma theta``."""
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    m = np.atleast_1d(np.asarray(m, dtype=np.float64))
    S = np.atleast_2d(np.asarray(Sigma, dtype=np.float64))
    return RegularisedLoss(
        value=lambda t: 0.5 * float((S @ t - m) @ Q @ (S @ t - m)),
        grad=lambda t: S.T @ (Q @ (S @ t - m)),
        hess=lambda t: S.T @ Q @ S,
        value_std=lambda mu: 0.5 * float((mu - m) @ Q @ (mu - m)),
        grad_std=lambda mu: Q @ (np.atleast_1d(mu) - m),
        standard_map=lambda t: S @ t,
        standard_jac=lambda t: S,
        name="quadratic_standard",
        params={"Q": Q.tolist(), "m": m.tolist(), "Sigma": S.tolist()},
    )


def normal_model_loss(x, Sigma0=1.0, Sigma=1.0) -> RegularisedLoss:
    """Negative log of ``N(x; mu, Sigma + Sigma0)`` (up to a constant), ``mu = Sigma theta``.

    This is the loss met when observing ``x`` with noise covariance ``Sigma0``
    under the conjugate family of ``B(theta) = theta^T Sigma theta / 2``.
    """
    S = _spd(Sigma, "Sigma")
    S0 = _spd(Sigma0, "Sigma0")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if S.shape != S0.shape or x.shape != (S.shape[0],):
        raise BadParameter("x, Sigma and Sigma0 have inconsistent dimensions")
    loss = quadratic_standard_loss(np.linalg.inv(S + S0), x, S)
    params = {"x": x.tolist(), "Sigma0": S0.tolist(), "Sigma": S.tolist()}
    return RegularisedLoss(**{**loss.__dict__, "name": "normal_model", "params": params})


def binomial_model_loss(x: float, n: int) -> RegularisedLoss:
    """Binomial negative log-likelihood ``-x log p - (n - x) log(1 - p)``, ``p = sigmoid(theta)``."""
    if not (isinstance(n, (int, np.integer)) and n >= 1) or not 0 <= x <= n:
        raise BadParameter(f"need an integer n >= 1 and 0 <= x <= n, got n={n!r}, x={x!r}")

    def grad_std(p):
        p = float(np.ravel(p)[0])
        return np.array([-x / p + (n - x) / (1.0 - p)])

    def value_std(p):
        p = float(np.ravel(p)[0])
        return -x * math.log(p) - (n - x) * math.log1p(-p)

    return RegularisedLoss(
        value=lambda t: float(n * np.logaddexp(0.0, t[0]) - x * t[0]),
        grad=lambda t: np.array([n * expit(t[0]) - x]),
        hess=lambda t: np.array([[n * expit(t[0]) * (1.0 - expit(t[0]))]]),
        value_std=value_std,
        grad_std=grad_std,
        standard_map=lambda t: np.array([expit(t[0])]),
        standard_jac=lambda t: np.array([[expit(t[0]) * (1.0 - expit(t[0]))]]),
        name="binomial_model",
        params={"x": float(x), "n": int(n)},
    )


# ---------------------------------------------------------------------------
# step configuration


MODES = ("exact", "approximate", "specialized")
INNER_SOLVERS = ("newton", "grid", "closed_form")


@dataclass(frozen=True)
class StepConfig:
    """Step sizes ``rho_t = rho / (1 + t / tau)`` (constant when ``tau`` is None) or a callable."""

    rho: float | Callable[[int], float] = 1.0
    tau: float | None = None
    max_iters: int = 1000
    grad_tol: float = 1e-10
    inner_solver: str = "newton"
    mode: str = "approximate"
    ascent_check: bool = False
    max_halvings: int = 40
    solve: SolveConfig = SolveConfig()

    def __post_init__(self):
        if not callable(self.rho) and not self.rho > 0:
            raise BadParameter(f"rho must be positive, got {self.rho}")
        if self.tau is not None and not self.tau > 0:
            raise BadParameter(f"tau must be positive, got {self.tau}")
        if not self.grad_tol > 0:
            raise BadParameter(f"grad_tol must be positive, got {self.grad_tol}")
        if self.max_iters < 0:
            raise BadParameter("max_iters must be >= 0")
        if self.mode not in MODES:
            raise BadParameter(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.inner_solver not in INNER_SOLVERS:
            raise BadParameter(f"inner_solver must be one of {INNER_SOLVERS}, got {self.inner_solver!r}")

    def rho_at(self, t: int) -> float:
        r = float(self.rho(t)) if callable(self.rho) else self.rho / (1.0 + t / self.tau if self.tau else 1.0)
        if not r > 0:
            raise BadParameter(f"step size rho_{t} = {r} is not positive")
        return r


# ---------------------------------------------------------------------------
# inner problem


@dataclass(frozen=True)
class InnerResult:
    theta: np.ndarray
    value: float
    tie: bool
    stationary: bool


def _safe_mode(spec: ExpFamilySpec, lam) -> np.ndarray | None:
    try:
        return spec.mode(lam)
    except (NonSingletonMode, DomainError, ArithmeticError):
        return None


def inner_argmax(loss: RegularisedLoss, lam, spec: ExpFamilySpec, cfg: StepConfig = StepConfig(),
                 full: bool = False):
    """A maximiser of ``lbar(theta) + lam^T theta - B(theta)`` over the family's domain.

    Returns the maximiser, or an :class:`InnerResult` when ``full`` is set.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    dom = spec.theta_domain
    ref = _safe_mode(spec, lam)

    if dom.is_discrete:
        pts = dom.enumerate()
        vals = np.array([loss(p) for p in pts]) + spec.stat(pts) @ lam - spec.base(pts)
        if np.any(vals == np.inf):
            raise InnerUnbounded("inner objective is +inf")
        top = np.flatnonzero(vals >= vals.max() - cfg.solve.tie_tol)
        if ref is not None:
            i = min(top, key=lambda k: float(np.linalg.norm(pts[k] - ref)))
        else:
            i = top[0]
        res = InnerResult(pts[i].copy(), float(vals[i]), top.size > 1, False)
        return res if full else res.theta

    def obj(t):
        return loss(t) + float(lam @ t) - spec.B(t)

    def grad(t):
        return loss.gradient(t) + lam - spec.grad_B(t)

    def hess(t):
        return loss.hessian(t) - spec.hess_B(t)

    x0 = ref if ref is not None else np.clip(np.zeros(dom.dim), dom.lower, dom.upper)
    if cfg.inner_solver == "closed_form":
        H = hess(x0)
        try:
            np.linalg.cholesky(-H)
        except np.linalg.LinAlgError:
            raise InnerUnbounded("inner objective is not strictly concave") from None
        x = x0 - np.linalg.solve(H, grad(x0))
        if not dom.contains(x) or np.linalg.norm(grad(x)) > max(cfg.grad_tol, 1e-8) * (1.0 + np.linalg.norm(lam)):
            raise InnerNoConvergence("closed-form stationary point does not solve the inner problem")
        res = InnerResult(x, obj(x), False, True)
        return res if full else res.theta

    use_grid = cfg.inner_solver == "grid" and dom.dim == 1
    r = maximize(obj, dom.lower, dom.upper, grad=grad, hess=hess, x0=x0, reference=ref,
                 use_grid=use_grid, config=cfg.solve,
                 unbounded=InnerUnbounded, no_convergence=InnerNoConvergence)
    g = grad(r.x)
    stationary = dom.interior(r.x) and np.linalg.norm(g) <= 1e-6 * (1.0 + np.linalg.norm(lam))
    res = InnerResult(r.x, r.value, r.tie, bool(stationary))
    return res if full else res.theta


def lower_cbo_member(loss: RegularisedLoss, spec: ExpFamilySpec, lam, cfg: StepConfig = StepConfig()) -> float:
    """Lower CBO of ``g_lam``; ``-inf`` when the inner problem is unbounded, NaN if unsolved."""
    try:
        inner = inner_argmax(loss, lam, spec, cfg, full=True)
        return log_partition(spec, lam) - inner.value
    except InnerUnbounded:
        return -math.inf
    except (InnerNoConvergence, ArithmeticError, DomainError):
        return math.nan


# ---------------------------------------------------------------------------
# steps


@dataclass(frozen=True)
class StepResult:
    lam: np.ndarray
    theta_bar: np.ndarray | None
    theta_hat: np.ndarray | None = None
    tie: bool = False
    objective: float = math.nan


def exact_direction(lam, loss: RegularisedLoss, spec: ExpFamilySpec, cfg: StepConfig = StepConfig()):
    """``(d, inner)`` with ``d = mode(lam + grad lbar(theta_hat)) - mode(lam)``.

    When the inner maximiser sits on the boundary of a box domain (so it is
    not a stationary point) the direction ``theta_hat - mode(lam)`` is used,
    which is the same vector whenever the inner maximiser is stationary.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    inner = inner_argmax(loss, lam, spec, cfg, full=True)
    bar = spec.mode(lam)
    if inner.stationary:
        d = spec.mode(lam + loss.gradient(inner.theta)) - bar
    else:
        d = inner.theta - bar
    return d, inner


def _exact(lam, t, loss, spec, cfg) -> StepResult:
    lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    d, inner = exact_direction(lam, loss, spec, cfg)
    rho = cfg.rho_at(t)
    obj = log_partition(spec, lam) - inner.value
    new = lam - rho * d
    if cfg.ascent_check:
        for _ in range(cfg.max_halvings):
            new = lam - rho * d
            if spec.lambda_domain.contains(new) and lower_cbo_member(loss, spec, new, cfg) >= obj - 1e-9:
                break
            rho *= 0.5
    return StepResult(new, spec.mode(lam), inner.theta, inner.tie, obj)


def exact_step(lam, t: int, loss: RegularisedLoss, spec: ExpFamilySpec, cfg: StepConfig = StepConfig()) -> np.ndarray:
    """One sub-gradient ascent step on the lower CBO."""
    return _exact(lam, t, loss, spec, cfg).lam


def approx_step(lam, t: int, loss: RegularisedLoss, spec: ExpFamilySpec, cfg: StepConfig = StepConfig()) -> np.ndarray:
    """``lam - rho_t I_lam^{-1} grad lbar(mode(lam))``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    if spec.theta_domain.is_discrete:
        raise DomainError("the approximate step needs a continuous family")
    bar = spec.mode(lam)
    I = spec.hess_B(bar)
    try:
        np.linalg.cholesky(I)
        if np.linalg.cond(I) > 1e14:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        raise SingularPrecision(f"precision at the mode is singular: {I.tolist()}") from None
    return lam - cfg.rho_at(t) * np.linalg.solve(I, loss.gradient(bar))


def normal_step(lam, t: int, loss: RegularisedLoss, cfg: StepConfig = StepConfig()) -> np.ndarray:
    """``lam - rho_t grad lbar_s(lam)``: the standard parameter of ``g_lam`` is ``lam`` itself."""
    if not loss.has_standard_form:
        raise MissingStandardForm(f"loss {loss.name!r} has no standard-parameter gradient")
    lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    return lam - cfg.rho_at(t) * np.atleast_1d(loss.grad_std(lam))


def binomial_step(p_hat: float, t: int, loss: RegularisedLoss, n: int, cfg: StepConfig = StepConfig()) -> float:
    """``p - (rho_t / n^2) d lbar_s / dp``, clipped to ``[eps, 1 - eps]``."""
    if not loss.has_standard_form:
        raise MissingStandardForm(f"loss {loss.name!r} has no standard-parameter gradient")
    p = float(p_hat)
    if not 0.0 < p < 1.0:
        raise DomainError(f"p_hat must lie in (0, 1), got {p}")
    g = float(np.ravel(loss.grad_std(np.array([p])))[0])
    new = p - cfg.rho_at(t) * g / n**2
    if not P_EPS <= new <= 1.0 - P_EPS:
        warnings.warn(f"p_hat = {new} left (0, 1); clipped", BoundaryParameterWarning, stacklevel=2)
        new = min(max(new, P_EPS), 1.0 - P_EPS)
    return new


# ---------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class TraceRecord:
    t: int
    lam: np.ndarray
    theta_bar: np.ndarray | None
    theta_hat: np.ndarray | None
    objective: float
    step_norm: float
    tie: bool = False


def _fmt(v: float) -> str:
    return repr(float(v))


def _ext(v):
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


@dataclass
class OptimizerTrace:
    records: list[TraceRecord]
    status: str
    final_lambda: np.ndarray
    family: str = ""
    n: int | None = None

    @property
    def iterations(self) -> int:
        return len(self.records) - 1

    @property
    def final_objective(self) -> float:
        return self.records[-1].objective if self.records else math.nan

    def summary(self) -> dict:
        out = {
            "status": self.status,
            "iterations": self.iterations,
            "final_lambda": [float(v) for v in self.final_lambda],
            "final_objective": _ext(self.final_objective),
        }
        if self.family == "binomial" and self.n:
            out["final_p_hat"] = float(self.final_lambda[0]) / self.n
        return out

    def to_csv(self) -> str:
        d = self.final_lambda.size
        lam_cols = ["lambda"] if d == 1 else [f"lambda_{i}" for i in range(d)]
        bar_cols = ["theta_bar"] if d == 1 else [f"theta_bar_{i}" for i in range(d)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *lam_cols, *bar_cols, "objective", "step_norm"])
        for r in self.records:
            bar = r.theta_bar if r.theta_bar is not None else np.full(d, np.nan)
            w.writerow([r.t, *map(_fmt, r.lam), *map(_fmt, bar), _fmt(r.objective), _fmt(r.step_norm)])
        return buf.getvalue()

    def write(self, out_dir, formats=("csv", "json")) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        if "csv" in formats:
            p = out / "trace.csv"
            p.write_text(self.to_csv(), encoding="utf-8", newline="\n")
            written.append(p)
        if "json" in formats:
            p = out / "summary.json"
            p.write_text(json.dumps(self.summary(), indent=2) + "\n", encoding="utf-8", newline="\n")
            written.append(p)
        return written


def _specialized(lam, t, loss, spec, cfg) -> StepResult:
    if spec.name == "normal":
        new = normal_step(lam, t, loss, cfg)
    elif spec.name == "binomial":
        n = spec.params["n"]
        new = np.array([n * binomial_step(lam[0] / n, t, loss, n, cfg)])
    else:
        raise BadParameter(f"no specialised update for family {spec.name!r}")
    return StepResult(new, _safe_mode(spec, lam))


def run(loss: RegularisedLoss, spec: ExpFamilySpec, lambda0, cfg: StepConfig = StepConfig(),
        track_objective: bool = True) -> OptimizerTrace:
    """Iterate the configured step until the relative change in ``lam`` is below ``grad_tol``."""
    lam = np.atleast_1d(np.asarray(lambda0, dtype=np.float64)).copy()
    if lam.shape != (spec.dim_lambda,) or not spec.lambda_domain.contains(lam):
        raise DomainError(f"lambda0 = {lam.tolist()} is not a valid natural parameter")
    records: list[TraceRecord] = []
    status = "MaxIters"
    for t in range(cfg.max_iters + 1):
        if not np.all(np.isfinite(lam)) or np.linalg.norm(lam) > DIVERGE_NORM:
            status = "Diverged"
            break
        if t == cfg.max_iters:
            records.append(TraceRecord(t, lam, _safe_mode(spec, lam), None,
                                       lower_cbo_member(loss, spec, lam, cfg) if track_objective else math.nan,
                                       0.0))
            break
        if cfg.mode == "exact":
            step = _exact(lam, t, loss, spec, cfg)
        else:
            if cfg.mode == "approximate":
                step = StepResult(approx_step(lam, t, loss, spec, cfg), spec.mode(lam))
            else:
                step = _specialized(lam, t, loss, spec, cfg)
            if track_objective:
                step = StepResult(step.lam, step.theta_bar, None, False, lower_cbo_member(loss, spec, lam, cfg))
        new = step.lam
        if spec.name == "binomial" and cfg.mode != "specialized":
            n = spec.params["n"]
            lo, hi = n * P_EPS, n * (1.0 - P_EPS)
            if not lo <= new[0] <= hi:
                warnings.warn(f"lambda = {new[0]} left (0, {n}); clipped", BoundaryParameterWarning, stacklevel=2)
                new = np.clip(new, lo, hi)
        norm = float(np.linalg.norm(new - lam))
        records.append(TraceRecord(t, lam, step.theta_bar, step.theta_hat, step.objective, norm, step.tie))
        if not math.isfinite(norm):
            status = "Diverged"
            lam = new
            break
        converged = norm <= cfg.grad_tol * (1.0 + float(np.linalg.norm(lam)))
        lam = new
        if converged:
            status = "Converged"
            break
    return OptimizerTrace(records, status, lam, spec.name, spec.params.get("n"))
