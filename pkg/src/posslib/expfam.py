"""Possibilistic exponential families and their conjugate families.

A possibilistic exponential family is ``g_lam(theta) = exp(lam^T T(theta) -
A(lam) - B(theta))`` where the log-partition ``A`` is a supremum rather than
a log-integral::

    A(lam) = sup_theta {lam^T T(theta) - B(theta)}

When ``T`` is the identity and ``B`` is the log-partition of a probabilistic
likelihood, ``A`` is the Legendre transform of ``B`` and the family is the
conjugate family of that likelihood: the maxitive posterior of
``exp(theta^T x - B(theta))`` under the prior ``g_lam^nu`` is
``g_{(x + nu lam)/(nu + 1)}^{nu + 1}``.

Parameters and points follow one convention: a parameter vector has shape
``(d,)``; a batch of points has shape ``(k, d)``; for ``d = 1`` plain floats
and 1-D arrays of points are accepted as well.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit, gammaln, xlogy

from ._numdiff import fd_gradient, fd_hessian
from ._solve import SolveConfig, maximize
from .errors import (
    BadParameter,
    ConsistencyError,
    DomainError,
    NoConvergence,
    NoMle,
    NonSingletonMode,
    OutsideHullWarning,
    Unbounded,
)

# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True, eq=False)
class Domain:
    """Parameter domain: a (possibly unbounded) box, an integer range or a finite set."""

    kind: str
    lower: np.ndarray
    upper: np.ndarray
    points: np.ndarray | None = None

    @classmethod
    def real(cls, dim: int = 1) -> "Domain":
        return cls("box", np.full(dim, -np.inf), np.full(dim, np.inf))

    @classmethod
    def box(cls, lower, upper) -> "Domain":
        lo = np.atleast_1d(np.asarray(lower, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(upper, dtype=np.float64))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise BadParameter("box bounds must have equal shapes and lower <= upper")
        return cls("box", lo, hi)

    @classmethod
    def integers(cls, lower: int, upper: int) -> "Domain":
        return cls("integers", np.array([float(lower)]), np.array([float(upper)]))

    @classmethod
    def finite(cls, points) -> "Domain":
        pts = np.asarray(points, dtype=np.float64)
        pts = pts[:, None] if pts.ndim == 1 else pts
        return cls("points", pts.min(axis=0), pts.max(axis=0), pts)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def is_discrete(self) -> bool:
        return self.kind != "box"

    def enumerate(self) -> np.ndarray:
        """All points of a discrete domain, shape ``(k, dim)``."""
        if self.kind == "integers":
            return np.arange(self.lower[0], self.upper[0] + 1.0)[:, None]
        if self.kind == "points":
            return self.points
        raise DomainError("a continuous box cannot be enumerated")

    def contains(self, pts, tol: float = 0.0) -> bool:
        pts = np.atleast_2d(pts)
        inside = np.all((pts >= self.lower - tol) & (pts <= self.upper + tol))
        if self.kind == "integers":
            return bool(inside and np.all(pts == np.round(pts)))
        if self.kind == "points":
            return bool(all(np.any(np.all(np.abs(self.points - p) <= tol, axis=1)) for p in pts))
        return bool(inside)

    def interior(self, x) -> bool:
        x = np.atleast_1d(x)
        return bool(np.all((x > self.lower) & (x < self.upper)))


def _points(theta, d: int) -> tuple[np.ndarray, bool]:
    """Normalise ``theta`` to shape ``(k, d)``; also report whether a single point was given."""
    a = np.asarray(theta, dtype=np.float64)
    if a.ndim == 0:
        return a.reshape(1, 1), True
    if a.ndim == 1:
        if d == 1:
            return a[:, None], a.size == 1
        if a.size != d:
            raise DomainError(f"expected a point of dimension {d}, got shape {a.shape}")
        return a[None, :], True
    if a.shape[-1] != d:
        raise DomainError(f"expected points of dimension {d}, got shape {a.shape}")
    return a.reshape(-1, d), False


def _vec(lam, d: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    if v.shape != (d,):
        raise DomainError(f"expected a parameter of dimension {d}, got shape {v.shape}")
    return v


# ---------------------------------------------------------------------------
# family specification


@dataclass(frozen=True, eq=False)
class ExpFamilySpec:
    """Sufficient statistic ``T``, base ``B`` and log-partition ``A`` of a family.

    ``stat`` and ``base`` take points of shape ``(k, d_theta)`` and return
    ``(k, d_lam)`` and ``(k,)`` respectively.  Closed forms (``log_partition``
    and its derivatives, ``mode_map``, derivatives of ``base``) are optional;
    anything missing is computed numerically.
    """

    name: str
    stat: Callable[[np.ndarray], np.ndarray]
    base: Callable[[np.ndarray], np.ndarray]
    theta_domain: Domain
    lambda_domain: Domain
    log_partition: Callable[[np.ndarray], float] | None = None
    log_partition_grad: Callable[[np.ndarray], np.ndarray] | None = None
    log_partition_hess: Callable[[np.ndarray], np.ndarray] | None = None
    base_grad: Callable[[np.ndarray], np.ndarray] | None = None
    base_hess: Callable[[np.ndarray], np.ndarray] | None = None
    mode_map: Callable[[np.ndarray], np.ndarray] | None = None
    stat_is_identity: bool = True
    natural_param: np.ndarray | None = None
    params: dict = field(default_factory=dict)
    solve: SolveConfig = SolveConfig()

    @property
    def dim_theta(self) -> int:
        return self.theta_domain.dim

    @property
    def dim_lambda(self) -> int:
        return self.lambda_domain.dim

    def config(self) -> dict:
        """The ``{"family": ..., "params": ...}`` record this spec was built from."""
        return {"family": self.name, "params": dict(self.params)}

    def B(self, theta):
        pts, single = _points(theta, self.dim_theta)
        v = self.base(pts)
        return float(v[0]) if single else v

    def T(self, theta):
        pts, single = _points(theta, self.dim_theta)
        v = self.stat(pts)
        return v[0] if single else v

    def A(self, lam) -> float:
        return log_partition(self, lam)

    def grad_B(self, theta) -> np.ndarray:
        x = _vec(theta, self.dim_theta)
        if self.base_grad is not None:
            return np.atleast_1d(self.base_grad(x))
        return fd_gradient(lambda t: self.B(t), x)

    def hess_B(self, theta) -> np.ndarray:
        x = _vec(theta, self.dim_theta)
        if self.base_hess is not None:
            return np.atleast_2d(self.base_hess(x))
        return fd_hessian(lambda t: self.B(t), x)

    def log_possibility(self, lam, theta):
        """``lam^T T(theta) - A(lam) - B(theta)`` (``-inf`` outside the domain)."""
        lam = _vec(lam, self.dim_lambda)
        pts, single = _points(theta, self.dim_theta)
        v = self.stat(pts) @ lam - log_partition(self, lam) - self.base(pts)
        return float(v[0]) if single else v

    def possibility(self, lam, theta):
        return np.exp(self.log_possibility(lam, theta))

    def mode(self, lam) -> np.ndarray:
        """Singleton mode of ``g_lam`` in ``theta`` coordinates."""
        lam = _vec(lam, self.dim_lambda)
        if self.mode_map is not None:
            return np.atleast_1d(self.mode_map(lam))
        if self.theta_domain.is_discrete:
            pts = self.theta_domain.enumerate()
            vals = self.stat(pts) @ lam - self.base(pts)
            top = np.flatnonzero(vals >= vals.max() - 1e-12)
            if top.size > 1:
                raise NonSingletonMode(f"modes at {pts[top].tolist()}")
            return pts[top[0]]
        if not self.stat_is_identity:
            res = maximize(
                lambda t: float(self.stat(t[None, :])[0] @ lam - self.base(t[None, :])[0]),
                self.theta_domain.lower,
                self.theta_domain.upper,
                config=self.solve,
            )
            return res.x
        return legendre(self.B, lam, self.theta_domain, self.solve,
                        grad=self.base_grad, hess=self.base_hess).argmax


# ---------------------------------------------------------------------------
# log-partition and Legendre transform


@dataclass(frozen=True)
class LegendreResult:
    value: float
    argmax: np.ndarray
    converged: bool
    iterations: int


def legendre(A: Callable, lam, domain: Domain, config: SolveConfig | None = None, *,
             grad: Callable | None = None, hess: Callable | None = None) -> LegendreResult:
    """Convex conjugate ``sup_theta {lam^T theta - A(theta)}`` and its maximiser.

    Discrete domains are enumerated exactly.  Continuous domains use a grid
    (in 1-D) followed by Newton polishing with the analytic derivatives of
    ``A`` when given, central differences otherwise.
    """
    config = config or SolveConfig()
    lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    if domain.is_discrete:
        pts = domain.enumerate()
        vals = pts @ lam - np.array([float(A(p)) for p in pts])
        i = int(np.argmax(vals))
        if vals[i] == np.inf:
            raise Unbounded("conjugate is +inf")
        return LegendreResult(float(vals[i]), pts[i].copy(), True, 0)

    def obj(t):
        return float(lam @ t - A(t))

    g = None if grad is None else (lambda t: lam - np.atleast_1d(grad(t)))
    h = None if hess is None else (lambda t: -np.atleast_2d(hess(t)))
    res = maximize(obj, domain.lower, domain.upper, grad=g, hess=h, config=config)
    return LegendreResult(res.value, res.x, res.converged, res.iterations)


def numeric_log_partition(spec: ExpFamilySpec, lam) -> float:
    """``sup_theta {lam^T T(theta) - B(theta)}`` by enumeration or numeric maximisation."""
    lam = _vec(lam, spec.dim_lambda)
    dom = spec.theta_domain
    if dom.is_discrete:
        pts = dom.enumerate()
        return float(np.max(spec.stat(pts) @ lam - spec.base(pts)))
    if spec.stat_is_identity:
        return legendre(spec.B, lam, dom, spec.solve, grad=spec.base_grad, hess=spec.base_hess).value
    res = maximize(
        lambda t: float(spec.stat(t[None, :])[0] @ lam - spec.base(t[None, :])[0]),
        dom.lower, dom.upper, config=spec.solve,
    )
    return res.value


def log_partition(spec: ExpFamilySpec, lam) -> float:
    """Log-partition ``A(lam)``: closed form when registered, else numeric."""
    lam = _vec(lam, spec.dim_lambda)
    if spec.log_partition is not None:
        v = float(spec.log_partition(lam))
        if v == np.inf:
            raise Unbounded(f"log-partition diverges at lambda = {lam}")
        return v
    return numeric_log_partition(spec, lam)


# ---------------------------------------------------------------------------
# conjugate members


@dataclass(frozen=True, eq=False)
class ConjugateMember:
    """``g_{lam, nu} = g_lam^nu``; ``nu = 0`` is the uninformative possibility function."""

    lam: np.ndarray
    nu: float
    spec: ExpFamilySpec

    def __post_init__(self):
        if not (self.nu >= 0 and math.isfinite(self.nu)):
            raise BadParameter(f"discount nu must be finite and >= 0, got {self.nu}")
        lam = _vec(self.lam, self.spec.dim_lambda).copy()
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "nu", float(self.nu))

    def __call__(self, theta):
        return eval_conjugate(self, theta)

    def to_dict(self) -> dict:
        return {"lambda": self.lam.tolist(), "nu": self.nu, "family": self.spec.config()}

    @classmethod
    def from_dict(cls, d: dict) -> "ConjugateMember":
        return cls(np.asarray(d["lambda"], dtype=np.float64), d["nu"], family_from_config(d["family"]))


def eval_conjugate(member: ConjugateMember, theta):
    """``exp(nu (lam^T T(theta) - A(lam) - B(theta)))``."""
    spec = member.spec
    pts, single = _points(theta, spec.dim_theta)
    if not spec.theta_domain.contains(pts):
        raise DomainError(f"theta outside the family's domain: {np.asarray(theta).tolist()}")
    if member.nu == 0.0:
        v = np.ones(pts.shape[0])
    else:
        v = np.exp(member.nu * spec.log_possibility(member.lam, pts))
    return float(v[0]) if single else v


def power_member_log(member: ConjugateMember, theta) -> float:
    """``log`` of the ``G_{nu A}`` member with natural parameter ``nu lam``.

    The log-partition ``(nu B)^dagger(nu lam)`` is obtained from a fresh
    numeric conjugate of ``nu B``, independently of ``A``.
    """
    spec, nu = member.spec, member.nu
    x = _vec(theta, spec.dim_theta)
    nl = nu * member.lam
    if spec.theta_domain.is_discrete:
        pts = spec.theta_domain.enumerate()
        conj = float(np.max(spec.stat(pts) @ nl - nu * spec.base(pts)))
    elif spec.stat_is_identity:
        gB = None if spec.base_grad is None else (lambda t: nu * np.atleast_1d(spec.base_grad(t)))
        hB = None if spec.base_hess is None else (lambda t: nu * np.atleast_2d(spec.base_hess(t)))
        conj = legendre(lambda t: nu * spec.B(t), nl, spec.theta_domain, spec.solve, grad=gB, hess=hB).value
    else:
        raise DomainError("power closure needs an identity statistic or a discrete domain")
    return float(spec.stat(x[None, :])[0] @ nl - conj - nu * spec.base(x[None, :])[0])


def bregman(A: Callable, theta, theta_ref, grad: Callable | None = None, subgrad=None) -> float:
    """Bregman divergence ``A(theta) - A(theta') - g^T (theta - theta')``.

    ``g`` is ``subgrad`` when given, else ``grad(theta')``, else a central
    finite difference of ``A`` at ``theta'``.
    """
    x = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    r = np.atleast_1d(np.asarray(theta_ref, dtype=np.float64))
    if subgrad is not None:
        g = np.atleast_1d(np.asarray(subgrad, dtype=np.float64))
    elif grad is not None:
        g = np.atleast_1d(grad(r))
    else:
        g = fd_gradient(A, r)
    a_x, a_r = float(A(x)), float(A(r))
    if not (math.isfinite(a_x) and math.isfinite(a_r)):
        raise DomainError("Bregman divergence needs both points in the domain of A")
    return a_x - a_r - float(g @ (x - r))


def family_bregman(spec: ExpFamilySpec, lam, theta) -> float:
    """``D_B(T(theta) || T(mode(lam)))`` for a member ``g_lam`` of ``spec``.

    Smooth families with identity statistic use ``grad B`` at the mode.  On
    discrete domains (or with a non-identity statistic) ``lam`` itself is the
    subgradient that certifies the mode, which is what the divergence uses.
    """
    lam = _vec(lam, spec.dim_lambda)
    x = _vec(theta, spec.dim_theta)
    m = spec.mode(lam)
    if spec.stat_is_identity and not spec.theta_domain.is_discrete:
        return bregman(spec.B, x, m, grad=spec.base_grad)
    pts = np.stack([x, m])
    s, b = spec.stat(pts), spec.base(pts)
    return float(b[0] - b[1] - lam @ (s[0] - s[1]))


def posterior_from_likelihood(spec: ExpFamilySpec, observed_stat) -> ConjugateMember:
    """Posterior under the uninformative prior: the member with ``lam = T(x)``, ``nu = 1``."""
    lam = _vec(observed_stat, spec.dim_lambda)
    dom = spec.lambda_domain
    if not dom.contains(lam) or (not dom.is_discrete and not dom.interior(lam)):
        raise NoMle(f"no maximum-likelihood estimate for statistic {lam.tolist()}")
    try:
        spec.mode(lam)
    except (Unbounded, NoConvergence, DomainError) as exc:
        raise NoMle(str(exc)) from exc
    return ConjugateMember(lam, 1.0, spec)


def conjugate_update(member: ConjugateMember, observed_stat) -> ConjugateMember:
    """``(lam, nu) -> ((T(x) + nu lam) / (nu + 1), nu + 1)``."""
    spec = member.spec
    t = _vec(observed_stat, spec.dim_lambda)
    if not spec.lambda_domain.contains(t, tol=1e-12):
        warnings.warn(f"statistic {t.tolist()} lies outside the convex hull of T", OutsideHullWarning, stacklevel=2)
    nu = member.nu
    return ConjugateMember((t + nu * member.lam) / (nu + 1.0), nu + 1.0, spec)


def dual_member(member: ConjugateMember, theta) -> Callable:
    """``f_theta: lam -> g_lam(theta) = exp(theta^T lam - A(theta) - A^dagger(lam))``.

    Here ``A`` is the family's base (the likelihood log-partition) and
    ``A^dagger`` its log-partition; ``A^dagger^dagger = A`` is used for closed
    convex ``A``.
    """
    spec = member.spec
    if member.nu != 1.0:
        raise BadParameter("the dual possibility function is defined for nu = 1")
    if not spec.stat_is_identity:
        raise DomainError("duality requires an identity sufficient statistic")
    x = _vec(theta, spec.dim_theta)
    b = spec.B(x)

    def f(lam):
        pts, single = _points(lam, spec.dim_lambda)
        out = np.empty(pts.shape[0])
        for i, lv in enumerate(pts):
            if not spec.lambda_domain.contains(lv):
                out[i] = 0.0
                continue
            out[i] = math.exp(float(x @ lv) - b - log_partition(spec, lv))
        return float(out[0]) if single else out

    return f


def mode_and_precision(member: ConjugateMember, check: bool = True, tol: float = 1e-6):
    """Mode ``grad A^dagger(lam)`` and precision ``nu * hess B(mode)``.

    With ``check`` the result is cross-checked against the second route,
    central differences of the log-partition (``hess A^dagger(lam)^{-1}``),
    and :class:`ConsistencyError` is raised on disagreement beyond ``tol``
    (relative to ``1 + |value|``).
    """
    spec = member.spec
    if spec.theta_domain.is_discrete:
        raise DomainError("precision is undefined on a discrete domain")
    lam = member.lam
    mode = spec.mode(lam)
    prec = member.nu * spec.hess_B(mode)
    if check:
        A = lambda v: log_partition(spec, v)  # noqa: E731
        mode_b = fd_gradient(A, lam)
        hess_a = spec.log_partition_hess(lam) if spec.log_partition_hess is not None else fd_hessian(A, lam)
        prec_b = member.nu * np.linalg.inv(np.atleast_2d(hess_a))
        for a, b, what in ((mode, mode_b, "mode"), (prec, prec_b, "precision")):
            if np.any(np.abs(a - b) > tol * (1.0 + np.abs(a))):
                raise ConsistencyError(f"{what} routes disagree: {np.ravel(a)} vs {np.ravel(b)}")
    return mode, prec


# ---------------------------------------------------------------------------
# builtin families


def make_normal_known_var(Sigma) -> ExpFamilySpec:
    """Normal likelihood with known covariance ``Sigma``: ``B(theta) = theta^T Sigma theta / 2``.

    Members are normal possibility functions ``N(theta; Sigma^{-1} lam, Sigma^{-1})``.
    """
    S = np.atleast_2d(np.asarray(Sigma, dtype=np.float64))
    if S.shape[0] != S.shape[1] or not np.allclose(S, S.T, atol=1e-12):
        raise BadParameter("Sigma must be a symmetric matrix")
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise BadParameter("Sigma must be positive definite") from None
    P = np.linalg.inv(S)
    P = 0.5 * (P + P.T)
    d = S.shape[0]
    return ExpFamilySpec(
        name="normal",
        stat=lambda pts: pts,
        base=lambda pts: 0.5 * np.einsum("ki,ij,kj->k", pts, S, pts),
        theta_domain=Domain.real(d),
        lambda_domain=Domain.real(d),
        log_partition=lambda lam: 0.5 * float(lam @ P @ lam),
        log_partition_grad=lambda lam: P @ lam,
        log_partition_hess=lambda lam: P,
        base_grad=lambda t: S @ t,
        base_hess=lambda t: S,
        mode_map=lambda lam: P @ lam,
        params={"Sigma": S.tolist() if d > 1 else float(S[0, 0])},
    )


def _binomial_conj(lam, n):
    l = float(lam[0])
    if l < 0 or l > n:
        return np.inf
    return float(xlogy(l, l / n) + xlogy(n - l, (n - l) / n))


def _binomial_mode(lam, n):
    l = float(lam[0])
    if not 0.0 < l < n:
        raise NoMle(f"binomial mode undefined for lambda = {l} outside (0, {n})")
    return np.array([math.log(l / (n - l))])


def make_binomial(n: int, theta_bounds=None) -> ExpFamilySpec:
    """Binomial likelihood with ``n`` trials: ``B(theta) = n log(1 + e^theta)``.

    ``theta_bounds`` optionally restricts the natural parameter to a box.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise BadParameter(f"n must be an integer >= 1, got {n!r}")
    n = int(n)
    theta_dom = Domain.real(1) if theta_bounds is None else Domain.box(*theta_bounds)
    params = {"n": n}
    if theta_bounds is not None:
        params["theta_bounds"] = [float(b) for b in theta_bounds]
    return ExpFamilySpec(
        name="binomial",
        stat=lambda pts: pts,
        base=lambda pts: n * np.logaddexp(0.0, pts[:, 0]),
        theta_domain=theta_dom,
        lambda_domain=Domain.box(0.0, float(n)),
        log_partition=lambda lam: _binomial_conj(lam, n),
        log_partition_grad=lambda lam: _binomial_mode(lam, n),
        log_partition_hess=lambda lam: np.array([[n / (lam[0] * (n - lam[0]))]]),
        base_grad=lambda t: n * expit(t),
        base_hess=lambda t: np.array([[n * expit(t[0]) * (1.0 - expit(t[0]))]]),
        mode_map=lambda lam: _binomial_mode(lam, n),
        params=params,
    )


def _poisson_conj(lam):
    k = math.floor(math.exp(lam[0]))
    return k * float(lam[0]) - math.lgamma(k + 1)


def _poisson_mode(lam):
    a = math.exp(lam[0])
    k = math.floor(a)
    if abs(a - round(a)) <= 1e-12 * max(1.0, a) and round(a) >= 1:
        r = int(round(a))
        raise NonSingletonMode(f"modes at {r - 1} and {r}")
    return np.array([float(k)])


def make_poisson_style(alpha: float, theta_max: int | None = None) -> ExpFamilySpec:
    """Poisson-style possibility on the non-negative integers, ``B(theta) = log theta!``.

    The integer domain is truncated at ``theta_max`` (default ``10 ceil(alpha)``,
    extended until the dropped tail is below ``1e-15``).
    """
    if not (alpha > 0 and math.isfinite(alpha)):
        raise BadParameter(f"alpha must be positive, got {alpha!r}")
    lam0 = math.log(alpha)
    k = math.floor(alpha)
    log_top = k * lam0 - math.lgamma(k + 1)
    if theta_max is None:
        theta_max = 10 * math.ceil(alpha)
        while theta_max * lam0 - math.lgamma(theta_max + 1) - log_top > math.log(1e-15):
            theta_max += 1
    return ExpFamilySpec(
        name="poisson_style",
        stat=lambda pts: pts,
        base=lambda pts: gammaln(pts[:, 0] + 1.0),
        theta_domain=Domain.integers(0, theta_max),
        lambda_domain=Domain.real(1),
        log_partition=_poisson_conj,
        mode_map=_poisson_mode,
        natural_param=np.array([lam0]),
        params={"alpha": float(alpha), "theta_max": int(theta_max)},
    )


def bernoulli_style_params(r: float) -> tuple[float, float]:
    """``(alpha0, alpha1)`` with ratio ``r`` and maximum 1."""
    return min(r, 1.0), min(1.0 / r, 1.0)


def _bernoulli_mode(lam):
    if abs(lam[0] - lam[1]) <= 1e-12:
        raise NonSingletonMode("modes at 0 and 1")
    return np.array([0.0 if lam[0] > lam[1] else 1.0])


def make_bernoulli_style(r: float) -> ExpFamilySpec:
    """Bernoulli-style possibility on ``{0, 1}`` with odds ratio ``r = alpha0 / alpha1``.

    ``T(theta) = (1 - theta, theta)``, ``B = 0`` and ``A(lam) = max(lam)``.
    """
    if not (r > 0 and math.isfinite(r)):
        raise BadParameter(f"r must be positive, got {r!r}")
    a0, a1 = bernoulli_style_params(r)
    return ExpFamilySpec(
        name="bernoulli_style",
        stat=lambda pts: np.column_stack([1.0 - pts[:, 0], pts[:, 0]]),
        base=lambda pts: np.zeros(pts.shape[0]),
        theta_domain=Domain.finite([0.0, 1.0]),
        lambda_domain=Domain.real(2),
        log_partition=lambda lam: float(np.max(lam)),
        mode_map=_bernoulli_mode,
        stat_is_identity=False,
        natural_param=np.array([math.log(a0), math.log(a1)]),
        params={"r": float(r)},
    )


FAMILIES = {
    "normal": lambda p: make_normal_known_var(p.get("Sigma", 1.0)),
    "binomial": lambda p: make_binomial(p["n"], p.get("theta_bounds")),
    "poisson_style": lambda p: make_poisson_style(p["alpha"], p.get("theta_max")),
    "bernoulli_style": lambda p: make_bernoulli_style(p["r"]),
}


def family_from_config(cfg: dict) -> ExpFamilySpec:
    """Build a builtin family from ``{"family": name, "params": {...}}``."""
    name = cfg.get("family")
    if name not in FAMILIES:
        raise BadParameter(f"unknown family {name!r}; expected one of {sorted(FAMILIES)}")
    try:
        return FAMILIES[name](cfg.get("params", {}))
    except KeyError as exc:
        raise BadParameter(f"family {name!r} needs parameter {exc.args[0]!r}") from None
