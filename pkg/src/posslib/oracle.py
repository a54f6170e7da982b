"""Independent oracles: random instances, brute-force bounds and order checks.

Everything here is deliberately simple (explicit Python loops, direct
comparisons) so that it can be trusted as a reference for the vectorised
and compiled code paths.  Randomness comes from numpy's ``PCG64`` generator
seeded through ``SeedSequence``, which is portable across platforms.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._numdiff import fd_gradient, fd_hessian  # noqa: F401  (re-exported)
from .bounds import (
    LossOnGrid,
    d_max_batch,
    lower_cbo_batch,
    maxitive_posterior,
    upper_cbo_batch,
)
from .core import DiscretePossibility, Grid
from .errors import Degenerate

__all__ = [
    "RandomInstance",
    "Theorem2Report",
    "brute_d_max",
    "brute_log_z",
    "brute_lower_cbo",
    "brute_upper_cbo",
    "check_theorem2",
    "fd_gradient",
    "fd_hessian",
    "grid_lower_cbo",
    "perturb_below",
    "perturb_not_below",
    "random_instance",
    "random_possibility",
    "sweep_theorem2",
]

MODE_GAP = 1e-6


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _normalised(v: np.ndarray) -> np.ndarray:
    top = int(np.argmax(v))
    v = v / v[top]
    v[top] = 1.0
    return v


# ---------------------------------------------------------------------------
# random generation


def random_possibility(seed, grid: Grid, zero_fraction: float = 0.0) -> DiscretePossibility:
    """Values uniform in ``(0, 1]``, a random fraction set to 0, then max-normalised."""
    if not 0.0 <= zero_fraction < 1.0:
        raise ValueError("zero_fraction must lie in [0, 1)")
    rng = _rng(seed)
    v = 1.0 - rng.random(grid.size)
    zero = rng.random(grid.size) < zero_fraction
    zero[int(np.argmax(v))] = False
    v[zero] = 0.0
    return DiscretePossibility(grid, _normalised(v))


def perturb_below(g: DiscretePossibility, seed) -> DiscretePossibility:
    """A possibility function ``g' <= g`` with ``g' != g``, keeping one point at 1.

    A random non-empty subset of the other positive points is scaled down by
    factors in ``(0.05, 0.95)``; a few of them may be set to 0.
    """
    rng = _rng(seed)
    v = g.values.copy()
    ones = np.flatnonzero(v == 1.0)
    keep = int(rng.choice(ones))
    movable = np.flatnonzero(v > 0.0)
    movable = movable[movable != keep]
    if movable.size == 0:
        raise Degenerate("g is a spike at a single point; nothing can be lowered")
    chosen = movable[rng.random(movable.size) < 0.5]
    if chosen.size == 0:
        chosen = movable[[int(rng.integers(movable.size))]]
    v[chosen] *= rng.uniform(0.05, 0.95, chosen.size)
    v[chosen[rng.random(chosen.size) < 0.2]] = 0.0
    return DiscretePossibility(g.grid, v)


def perturb_not_below(g: DiscretePossibility, seed) -> DiscretePossibility:
    """Raise ``g`` at one non-modal point, ``v -> v + u (1 - v)`` with ``u`` in ``(0.1, 1]``."""
    rng = _rng(seed)
    v = g.values.copy()
    low = np.flatnonzero(v < 1.0 - MODE_GAP)
    if low.size == 0:
        raise Degenerate("g is identically 1; nothing can be raised")
    i = int(rng.choice(low))
    u = 1.0 - rng.uniform(0.0, 0.9)
    v[i] = v[i] + u * (1.0 - v[i])
    return DiscretePossibility(g.grid, v)


@dataclass(frozen=True, eq=False)
class RandomInstance:
    seed: int
    grid_size: int
    loss: LossOnGrid
    prior: DiscretePossibility
    candidates: list[DiscretePossibility]

    @property
    def grid(self) -> Grid:
        return self.prior.grid


def random_instance(seed, grid_size: int, n_candidates: int = 500) -> RandomInstance:
    """Losses uniform in ``[0, 5]`` with some ``+inf``, a prior with zeros, random candidates.

    The instance is always consistent: at least one point has finite loss
    and positive prior.
    """
    rng = _rng(seed)
    grid = Grid.range(grid_size)
    loss = rng.uniform(0.0, 5.0, grid_size)
    loss[rng.random(grid_size) < 0.1] = np.inf
    prior = random_possibility(rng.integers(2**63), grid, 0.2).values.copy()
    ok = np.isfinite(loss) & (prior > 0)
    if not ok.any():
        j = int(rng.integers(grid_size))
        loss[j] = rng.uniform(0.0, 5.0)
        prior[j] = 1.0
    child = rng.integers(2**63, size=n_candidates)
    fracs = rng.choice([0.0, 0.0, 0.25, 0.5], size=n_candidates)
    cands = [random_possibility(int(s), grid, float(z)) for s, z in zip(child, fracs)]
    return RandomInstance(int(seed), grid_size, LossOnGrid(grid, loss), DiscretePossibility(grid, prior), cands)


# ---------------------------------------------------------------------------
# brute-force bounds


def _log_target(loss: LossOnGrid, prior: DiscretePossibility) -> list[float]:
    with np.errstate(divide="ignore"):
        lp = np.log(prior.values)
    return [-float(l) + float(p) for l, p in zip(loss.loss, lp)]


def _log(values) -> list[float]:
    with np.errstate(divide="ignore"):
        return [float(v) for v in np.log(np.asarray(values, dtype=np.float64))]


def brute_log_z(loss: LossOnGrid, prior: DiscretePossibility) -> float:
    best = -math.inf
    for h in _log_target(loss, prior):
        if h > best:
            best = h
    return best


def brute_lower_cbo(g: DiscretePossibility, loss: LossOnGrid, prior: DiscretePossibility) -> float:
    out = math.inf
    for h, lg in zip(_log_target(loss, prior), _log(g.values)):
        if lg == -math.inf:
            continue
        out = min(out, -math.inf if h == -math.inf else h - lg)
    return out


def brute_upper_cbo(g: DiscretePossibility, loss: LossOnGrid, prior: DiscretePossibility) -> float:
    out = -math.inf
    for h, lg in zip(_log_target(loss, prior), _log(g.values)):
        if h == -math.inf:
            continue
        out = max(out, math.inf if lg == -math.inf else h - lg)
    return out


def brute_d_max(g: DiscretePossibility, f: DiscretePossibility) -> float:
    out = -math.inf
    for a, b in zip(g.values, f.values):
        if a == 0.0:
            continue
        out = max(out, math.inf if b == 0.0 else math.log(a) - math.log(b))
    return out


def grid_lower_cbo(log_target_values, log_g_values) -> float:
    """``min_theta (log target - log g)`` over grid points where ``g > 0``."""
    h = np.asarray(log_target_values, dtype=np.float64)
    lg = np.asarray(log_g_values, dtype=np.float64)
    keep = lg > -np.inf
    return float(np.min(h[keep] - lg[keep]))


# ---------------------------------------------------------------------------
# characterisation check


def _gap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``|a - b|`` with equal infinities counted as 0."""
    with np.errstate(invalid="ignore"):
        d = np.abs(a - b)
    d[(a == b)] = 0.0
    return d


@dataclass
class Theorem2Report:
    seed: int
    grid_size: int
    log_z_max: float
    is_leq_gstar: np.ndarray
    is_geq_gstar: np.ndarray
    lower_cbo: np.ndarray
    upper_cbo: np.ndarray
    lower_achieves: np.ndarray
    upper_achieves: np.ndarray
    decomposition_residual: np.ndarray
    sandwich_slack: dict = field(default_factory=dict)
    tol: float = 1e-9
    skipped_perturbations: int = 0

    @property
    def n_candidates(self) -> int:
        return self.lower_cbo.size

    @property
    def characterisation_ok(self) -> bool:
        return bool(np.all(self.lower_achieves == self.is_leq_gstar) and np.all(self.upper_achieves == self.is_geq_gstar))

    @property
    def decomposition_ok(self) -> bool:
        return bool(np.all(self.decomposition_residual <= self.tol))

    @property
    def sandwich_ok(self) -> bool:
        return all(bool(np.all(s >= -self.tol)) for s in self.sandwich_slack.values())

    @property
    def passed(self) -> bool:
        return self.characterisation_ok and self.decomposition_ok and self.sandwich_ok

    @property
    def worst_violation(self) -> float:
        """Largest breach among the checked relations (0 when all hold exactly)."""
        lz = self.log_z_max
        lo_gap = _gap(self.lower_cbo, np.full_like(self.lower_cbo, lz))
        up_gap = _gap(self.upper_cbo, np.full_like(self.upper_cbo, lz))
        worst = float(np.max(self.decomposition_residual, initial=0.0))
        # a mismatch in the characterisation is measured by how close the bound came
        bad_lo = self.lower_achieves != self.is_leq_gstar
        bad_up = self.upper_achieves != self.is_geq_gstar
        if bad_lo.any():
            worst = max(worst, float(np.max(np.where(self.lower_achieves[bad_lo], 1.0, lo_gap[bad_lo]))))
        if bad_up.any():
            worst = max(worst, float(np.max(np.where(self.upper_achieves[bad_up], 1.0, up_gap[bad_up]))))
        for s in self.sandwich_slack.values():
            worst = max(worst, float(-np.min(s, initial=0.0)))
        return worst

    def records(self) -> list[dict]:
        return [
            {
                "is_leq_gstar": bool(self.is_leq_gstar[i]),
                "is_geq_gstar": bool(self.is_geq_gstar[i]),
                "lower_cbo": _ext(self.lower_cbo[i]),
                "upper_cbo": _ext(self.upper_cbo[i]),
                "log_z_max": _ext(self.log_z_max),
                "lower_achieves": bool(self.lower_achieves[i]),
                "upper_achieves": bool(self.upper_achieves[i]),
            }
            for i in range(self.n_candidates)
        ]

    def to_dict(self, with_records: bool = True) -> dict:
        out = {
            "seed": self.seed,
            "grid_size": self.grid_size,
            "n_candidates": self.n_candidates,
            "pass": self.passed,
            "worst_violation": self.worst_violation,
        }
        if with_records:
            out["records"] = self.records()
        return out

    def to_json(self, with_records: bool = True) -> str:
        return json.dumps(self.to_dict(with_records), indent=2)


def _ext(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def check_theorem2(instance: RandomInstance, n_perturb: int = 20, tol: float = 1e-9,
                   alphas=(0.1, 0.5, 0.9)) -> Theorem2Report:
    """Verify both set characterisations, the decompositions and the sandwich bound.

    The candidates are the instance's own plus ``g*``, the all-ones function,
    and ``n_perturb`` perturbations of ``g*`` in each direction.  Order
    relations are decided by direct comparison of values; the bounds come
    from the library's batched kernels.
    """
    loss, prior = instance.loss, instance.prior
    gstar, log_z = maxitive_posterior(loss, prior)
    rng = _rng([instance.seed, 0x7E5])
    cands = list(instance.candidates) + [gstar, DiscretePossibility.uniform(instance.grid)]
    skipped = 0
    for make in (perturb_below, perturb_not_below):
        for s in rng.integers(2**63, size=n_perturb):
            try:
                cands.append(make(gstar, int(s)))
            except Degenerate:
                skipped += 1
    G = np.stack([c.values for c in cands])
    is_leq = np.all(G <= gstar.values, axis=1)
    is_geq = np.all(G >= gstar.values, axis=1)

    lo = lower_cbo_batch(G, loss, prior)
    up = upper_cbo_batch(G, loss, prior)
    d_g_star = d_max_batch(G, gstar)
    d_star_g = d_max_batch(G, gstar, reverse=True)
    full = np.full_like(lo, log_z)
    with np.errstate(invalid="ignore"):
        decomp = np.maximum(_gap(full - lo, d_g_star), _gap(up - full, d_star_g))

    slack = {}
    for a in alphas:
        with np.errstate(invalid="ignore"):
            s_g = a * up - (1.0 - a) * lo
            s_star = (2.0 * a - 1.0) * log_z
            rhs = a * d_star_g + (1.0 - a) * d_g_star
            sl = (s_g - s_star) - rhs
        both_inf = np.isinf(rhs) & (s_g == np.inf)
        sl[both_inf] = 0.0
        sl[np.isnan(sl)] = -np.inf
        slack[a] = sl

    return Theorem2Report(
        seed=instance.seed,
        grid_size=instance.grid_size,
        log_z_max=log_z,
        is_leq_gstar=is_leq,
        is_geq_gstar=is_geq,
        lower_cbo=lo,
        upper_cbo=up,
        lower_achieves=_gap(lo, full) <= tol,
        upper_achieves=_gap(up, full) <= tol,
        decomposition_residual=decomp,
        sandwich_slack=slack,
        tol=tol,
        skipped_perturbations=skipped,
    )


def sweep_theorem2(seeds, sizes=(2, 4, 16, 64), n_candidates: int = 500, n_perturb: int = 20,
                   tol: float = 1e-9) -> list[Theorem2Report]:
    """One instance per seed, grid sizes cycling through ``sizes``."""
    return [
        check_theorem2(random_instance(int(s), sizes[i % len(sizes)], n_candidates), n_perturb, tol)
        for i, s in enumerate(seeds)
    ]


def sweep_csv(reports: list[Theorem2Report]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "grid_size", "pass", "worst_violation"])
    for r in reports:
        w.writerow([r.seed, r.grid_size, str(r.passed).lower(), repr(r.worst_violation)])
    return buf.getvalue()
