"""Named verification suites shared by ``posslib verify`` and the test-suite.

Each suite draws its own random cases from a seed, checks one family of
identities and returns a :class:`SuiteResult` whose rows can be written as
CSV.  A tolerance override applies to every comparison in the suite.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import expfam as E
from . import oracle, varopt

DEFAULT_TOL = {
    "theorem2": 1e-9,
    "decomposition": 1e-9,
    "bregman": 1e-9,
    "conjugacy": 1e-6,
    "duality": 1e-9,
    "cor1_equiv": 1e-10,
    "cor2_equiv": 1e-10,
}


@dataclass
class VerifyOptions:
    seed: int = 0
    n_instances: int = 100
    sizes: tuple = (2, 4, 16, 64)
    n_candidates: int = 500
    n_perturb: int = 20
    trials: int = 100
    tolerance: float | None = None


@dataclass
class SuiteResult:
    name: str
    passed: bool
    worst: float
    tol: float
    header: list[str]
    rows: list[list] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([_cell(c) for c in r])
        return buf.getvalue()


def _cell(c):
    if isinstance(c, bool):
        return str(c).lower()
    if isinstance(c, float):
        return repr(c)
    return c


def _rng(opts: VerifyOptions, name: str) -> np.random.Generator:
    key = sorted(DEFAULT_TOL).index(name)
    return np.random.default_rng(np.random.SeedSequence([opts.seed, key]))


def _tol(opts: VerifyOptions, name: str) -> float:
    return DEFAULT_TOL[name] if opts.tolerance is None else opts.tolerance


def _sweep(opts: VerifyOptions, tol: float):
    seeds = np.random.SeedSequence(opts.seed).generate_state(opts.n_instances, dtype=np.uint64)
    return oracle.sweep_theorem2(seeds, tuple(opts.sizes), opts.n_candidates, opts.n_perturb, tol)


def suite_theorem2(opts: VerifyOptions) -> SuiteResult:
    tol = _tol(opts, "theorem2")
    reports = _sweep(opts, tol)
    rows = [[r.seed, r.grid_size, r.n_candidates, r.characterisation_ok and r.sandwich_ok, r.worst_violation]
            for r in reports]
    ok = all(r[3] for r in rows)
    return SuiteResult("theorem2", ok, max(r[4] for r in rows), tol,
                       ["seed", "grid_size", "n_candidates", "pass", "worst_violation"], rows)


def suite_decomposition(opts: VerifyOptions) -> SuiteResult:
    tol = _tol(opts, "decomposition")
    reports = _sweep(opts, tol)
    rows = []
    for r in reports:
        worst = float(np.max(r.decomposition_residual))
        rows.append([r.seed, r.grid_size, r.n_candidates, bool(worst <= tol), worst])
    return SuiteResult("decomposition", all(r[3] for r in rows), max(r[4] for r in rows), tol,
                       ["seed", "grid_size", "n_candidates", "pass", "worst_residual"], rows)


def _bregman_cases(rng, trials):
    """(spec, lam, theta) triples for the four builtin families."""
    for _ in range(trials):
        S = rng.uniform(0.3, 3.0)
        spec = E.make_normal_known_var(S)
        yield spec, [rng.normal(0, 2)], [rng.normal(0, 2)]
    for _ in range(trials):
        n = int(rng.integers(1, 30))
        spec = E.make_binomial(n)
        yield spec, [n * rng.uniform(0.02, 0.98)], [rng.uniform(-6, 6)]
    for _ in range(trials):
        a = float(rng.uniform(0.2, 12.0))
        spec = E.make_poisson_style(a)
        k = int(rng.integers(0, spec.params["theta_max"] + 1))
        yield spec, spec.natural_param, [float(k)]
    for _ in range(trials):
        r = float(np.exp(rng.normal(0, 1.5)))
        spec = E.make_bernoulli_style(r)
        yield spec, spec.natural_param + rng.normal(0, 1), [float(rng.integers(0, 2))]


def suite_bregman(opts: VerifyOptions) -> SuiteResult:
    tol = _tol(opts, "bregman")
    worst: dict[str, float] = {}
    for spec, lam, theta in _bregman_cases(_rng(opts, "bregman"), opts.trials):
        err = abs(-spec.log_possibility(lam, theta) - E.family_bregman(spec, lam, theta))
        worst[spec.name] = max(worst.get(spec.name, 0.0), err)
    rows = [[name, opts.trials, bool(w <= tol), w] for name, w in worst.items()]
    return SuiteResult("bregman", all(r[2] for r in rows), max(worst.values()), tol,
                       ["family", "trials", "pass", "worst_abs_error"], rows)


def conjugacy_error(spec: E.ExpFamilySpec, lam: float, nu: float, x: float, grid: np.ndarray) -> float:
    """Max pointwise gap between the grid posterior and the closed-form update."""
    prior = E.ConjugateMember([lam], nu, spec)
    pts = grid[:, None]
    log_lik = pts[:, 0] * x - spec.base(pts)
    log_prior = 0.0 if nu == 0 else nu * spec.log_possibility(prior.lam, pts)
    h = log_prior + log_lik
    post_grid = np.exp(h - h.max())
    post = E.conjugate_update(prior, [x])
    post_closed = np.exp(post.nu * spec.log_possibility(post.lam, pts))
    return float(np.max(np.abs(post_grid - post_closed)))


def suite_conjugacy(opts: VerifyOptions) -> SuiteResult:
    tol = _tol(opts, "conjugacy")
    rng = _rng(opts, "conjugacy")
    grid = np.arange(-12.0, 12.0, 1e-4) + 0.5e-4 * rng.uniform()
    n_cases = max(2, opts.trials // 20)
    rows = []
    for nu in (0.0, 0.5, 1.0, 3.0):
        w_norm = w_bin = 0.0
        for _ in range(n_cases):
            S = rng.uniform(0.5, 2.0)
            w_norm = max(w_norm, conjugacy_error(E.make_normal_known_var(S), rng.normal(0, 1.5), nu,
                                                 rng.normal(0, 1.5), grid))
            n = int(rng.integers(2, 20))
            x = float(rng.integers(1, n))
            w_bin = max(w_bin, conjugacy_error(E.make_binomial(n), n * rng.uniform(0.1, 0.9), nu, x, grid))
        rows.append(["normal", nu, n_cases, bool(w_norm <= tol), w_norm])
        rows.append(["binomial", nu, n_cases, bool(w_bin <= tol), w_bin])
    return SuiteResult("conjugacy", all(r[3] for r in rows), max(r[4] for r in rows), tol,
                       ["family", "nu", "cases", "pass", "worst_abs_error"], rows)


def dual_errors(spec: E.ExpFamilySpec, theta: float, lam_grid: np.ndarray) -> tuple[float, float]:
    """(excess of the dual above 1 on a grid, ``|1 - f_theta(grad B(theta))|``)."""
    f = E.dual_member(E.ConjugateMember(spec.grad_B([theta]), 1.0, spec), [theta])
    vals = f(lam_grid)
    peak = f(float(spec.grad_B([theta])[0]))
    return max(0.0, float(np.max(vals)) - 1.0), abs(1.0 - peak)


def suite_duality(opts: VerifyOptions) -> SuiteResult:
    tol = _tol(opts, "duality")
    tol_mode = max(tol, 1e-6) if opts.tolerance is None else opts.tolerance
    rng = _rng(opts, "duality")
    worst_pow: dict[str, float] = {}
    for spec, lam, theta in _bregman_cases(rng, max(1, opts.trials // 4)):
        nu = float(rng.uniform(0.1, 4.0))
        if spec.name == "binomial":
            theta = [float(np.clip(theta[0], -4, 4))]
        m = E.ConjugateMember(lam, nu, spec)
        err = abs(E.power_member_log(m, theta) - nu * spec.log_possibility(lam, theta))
        worst_pow[spec.name] = max(worst_pow.get(spec.name, 0.0), err)
    rows = [[f"power:{k}", bool(v <= tol), v] for k, v in worst_pow.items()]

    for name, make, lam_grid in (
        ("normal", lambda: E.make_normal_known_var(rng.uniform(0.5, 2.0)), np.linspace(-20, 20, 4001)),
        ("binomial", lambda: E.make_binomial(int(rng.integers(2, 20))), None),
    ):
        w_norm = w_mode = 0.0
        for _ in range(max(2, opts.trials // 20)):
            spec = make()
            theta = float(rng.uniform(-2.5, 2.5))
            grid = lam_grid if lam_grid is not None else np.linspace(0, spec.params["n"], 2001)
            a, b = dual_errors(spec, theta, grid)
            w_norm, w_mode = max(w_norm, a), max(w_mode, b)
        rows.append([f"dual_max:{name}", bool(w_norm <= tol), w_norm])
        rows.append([f"dual_mode:{name}", bool(w_mode <= tol_mode), w_mode])
    return SuiteResult("duality", all(r[1] for r in rows), max(r[2] for r in rows), tol,
                       ["check", "pass", "worst_abs_error"], rows)


def random_spd(rng, d: int) -> np.ndarray:
    A = rng.normal(size=(d, d))
    return A @ A.T + 0.5 * np.eye(d)


def suite_cor1(opts: VerifyOptions) -> SuiteResult:
    tol = _tol(opts, "cor1_equiv")
    rng = _rng(opts, "cor1_equiv")
    worst = 0.0
    for _ in range(opts.trials):
        d = int(rng.integers(1, 4))
        S = random_spd(rng, d)
        Q = random_spd(rng, d)
        loss = varopt.quadratic_standard_loss(Q, rng.normal(size=d), S)
        spec = E.make_normal_known_var(S)
        lam = rng.normal(0, 2, size=d)
        cfg = varopt.StepConfig(rho=float(rng.uniform(0.05, 1.0)))
        a = varopt.approx_step(lam, 0, loss, spec, cfg)
        b = varopt.normal_step(lam, 0, loss, cfg)
        worst = max(worst, float(np.max(np.abs(a - b))))
    ex = normal_example()
    ex_err = abs(ex.final_lambda[0] - 0.3)
    ex_ok = ex.status == "Converged" and ex.iterations <= 200 and ex_err <= max(tol, 1e-6)
    rows = [["approx_vs_normal_step", opts.trials, bool(worst <= tol), worst],
            ["normal_example", ex.iterations, bool(ex_ok), ex_err]]
    return SuiteResult("cor1_equiv", all(r[2] for r in rows), worst, tol,
                       ["check", "count", "pass", "worst_abs_error"], rows)


def normal_example(mode: str = "approximate", x: float = 0.3, rho: float = 0.5, lambda0: float = 0.0):
    spec = E.make_normal_known_var(1.0)
    loss = varopt.normal_model_loss(x, 1.0, 1.0)
    return varopt.run(loss, spec, [lambda0], varopt.StepConfig(rho=rho, mode=mode, max_iters=200))


def binomial_example(mode: str = "specialized", n: int = 10, x: int = 7, rho: float = 1.0, p0: float = 0.5):
    spec = E.make_binomial(n)
    loss = varopt.binomial_model_loss(x, n)
    return varopt.run(loss, spec, [n * p0], varopt.StepConfig(rho=rho, mode=mode, max_iters=500))


def suite_cor2(opts: VerifyOptions) -> SuiteResult:
    tol = _tol(opts, "cor2_equiv")
    rng = _rng(opts, "cor2_equiv")
    worst = 0.0
    for _ in range(opts.trials):
        n = int(rng.integers(1, 50))
        x = float(rng.integers(0, n + 1))
        lam = n * rng.uniform(0.05, 0.95)
        loss = varopt.binomial_model_loss(x, n)
        cfg = varopt.StepConfig(rho=float(rng.uniform(0.01, 0.2)))
        a = varopt.approx_step([lam], 0, loss, E.make_binomial(n), cfg)[0] / n
        b = varopt.binomial_step(lam / n, 0, loss, n, cfg)
        worst = max(worst, abs(a - b))
    one = varopt.binomial_step(0.5, 0, varopt.binomial_model_loss(7, 10), 10, varopt.StepConfig(rho=1.0))
    ex = binomial_example()
    ex_err = abs(ex.final_lambda[0] / 10 - 0.7)
    rows = [["approx_vs_binomial_step", opts.trials, bool(worst <= tol), worst],
            ["single_step_0.58", 1, one == 0.58, abs(one - 0.58)],
            ["binomial_example", ex.iterations, bool(ex.status == "Converged" and ex_err <= max(tol, 1e-6)), ex_err]]
    return SuiteResult("cor2_equiv", all(r[2] for r in rows), max(worst, abs(one - 0.58)), tol,
                       ["check", "count", "pass", "worst_abs_error"], rows)


SUITES: dict[str, Callable[[VerifyOptions], SuiteResult]] = {
    "theorem2": suite_theorem2,
    "decomposition": suite_decomposition,
    "bregman": suite_bregman,
    "conjugacy": suite_conjugacy,
    "duality": suite_duality,
    "cor1_equiv": suite_cor1,
    "cor2_equiv": suite_cor2,
}


def run_suite(name: str, opts: VerifyOptions) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name](opts)

