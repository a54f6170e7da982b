"""Command-line front end: ``posslib {posterior,bounds,fit,verify} --config FILE``.

Exit codes: 0 success, 1 other library error, 2 configuration error,
3 inconsistent prior and likelihood, 4 diverged optimiser, 5 failed
verification suite.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import bounds, core, expfam, suites, varopt
from .errors import Inconsistent, NegativeLossWarning, PossError

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_INCONSISTENT, EXIT_DIVERGED, EXIT_SUITE = 0, 1, 2, 3, 4, 5


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# schemas

_num = {"type": "number"}
_nums = {"type": "array", "items": _num, "minItems": 1}
_matrix = {"oneOf": [_num, {"type": "array", "items": _nums, "minItems": 1}]}
_vec = {"oneOf": [_num, _nums]}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


def _kinds(*variants) -> dict:
    return {"oneOf": variants}


def _kind(name: str, props: dict | None = None, required=()) -> dict:
    props = {"kind": {"const": name}, **(props or {})}
    return _obj(props, ["kind", *required])


GRID = {
    "oneOf": [
        _obj({"points": _nums}, ["points"]),
        _obj({"linspace": _obj({"start": _num, "stop": _num, "num": {"type": "integer", "minimum": 1}},
                               ["start", "stop", "num"])}, ["linspace"]),
        _obj({"range": {"type": "integer", "minimum": 1}}, ["range"]),
    ]
}

GRID_LOSS = _kinds(
    _kind("table", {"values": {"type": "array", "items": {"type": ["number", "string"]}, "minItems": 1}}, ["values"]),
    _kind("quadratic", {"center": _num, "weight": _num}, ["center"]),
    _kind("normal_model", {"x": _num, "sigma2": {"type": "number", "exclusiveMinimum": 0}}, ["x"]),
    _kind("binomial_model", {"x": {"type": "integer", "minimum": 0}, "n": {"type": "integer", "minimum": 1}}, ["x", "n"]),
)

POSSIBILITY = _kinds(
    _kind("table", {"values": _nums}, ["values"]),
    _kind("uniform"),
    _kind("normal", {"mu": _num, "sigma2": {"type": "number", "exclusiveMinimum": 0}}, ["mu"]),
    _kind("file", {"path": {"type": "string"}}, ["path"]),
)

CANDIDATE = {"oneOf": [*POSSIBILITY["oneOf"], _kind("posterior")]}

FIT_LOSS = _kinds(
    _kind("quadratic", {"Q": _matrix, "c": _vec}, ["Q", "c"]),
    _kind("normal_model", {"x": _vec, "Sigma0": _matrix, "Sigma": _matrix}, ["x"]),
    _kind("binomial_model", {"x": {"type": "integer", "minimum": 0}, "n": {"type": "integer", "minimum": 1}}, ["x", "n"]),
    _kind("zero"),
)

FAMILY = _obj({"family": {"enum": sorted(expfam.FAMILIES)}, "params": {"type": "object"}}, ["family"])

STEP = _obj({
    "rho": {"type": "number", "exclusiveMinimum": 0},
    "tau": {"type": "number", "exclusiveMinimum": 0},
    "max_iters": {"type": "integer", "minimum": 0},
    "grad_tol": {"type": "number", "exclusiveMinimum": 0},
    "inner_solver": {"enum": list(varopt.INNER_SOLVERS)},
    "mode": {"enum": list(varopt.MODES)},
    "ascent_check": {"type": "boolean"},
})

_seed = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}

SCHEMAS = {
    "posterior": _obj({"grid": GRID, "loss": GRID_LOSS, "prior": POSSIBILITY, "seed": _seed}, ["grid", "loss"]),
    "bounds": _obj({
        "grid": GRID, "loss": GRID_LOSS, "prior": POSSIBILITY, "candidate": CANDIDATE,
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}, "seed": _seed,
    }, ["grid", "loss", "candidate"]),
    "fit": _obj({"family": FAMILY, "loss": FIT_LOSS, "lambda0": _vec, "step": STEP, "seed": _seed},
                ["family", "loss"]),
    "verify": _obj({
        "suites": {"type": "array", "items": {"enum": list(suites.SUITES)}, "minItems": 1},
        "seed": _seed,
        "n_instances": {"type": "integer", "minimum": 1},
        "sizes": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "n_candidates": {"type": "integer", "minimum": 0},
        "n_perturb": {"type": "integer", "minimum": 0},
        "trials": {"type": "integer", "minimum": 1},
        "tolerance": {"type": ["number", "null"], "exclusiveMinimum": 0},
    }),
}


def _where(path) -> str:
    out = "config"
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _best_error(err: jsonschema.ValidationError) -> jsonschema.ValidationError:
    """Descend into ``oneOf`` branches to the most specific message."""
    while err.context:
        # prefer the branch whose "kind" matched, i.e. the deepest error
        err = max(err.context, key=lambda e: (len(e.absolute_path), e.validator != "const"))
    return err


def validate_config(command: str, cfg) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = []
        for e in errors:
            b = _best_error(e)
            if b.validator == "enum" and list(b.absolute_path)[:1] == ["suites"]:
                lines.append(f"{_where(b.absolute_path)}: unknown suite {b.instance!r}; valid suites: "
                             f"{', '.join(suites.SUITES)}")
            else:
                lines.append(f"{_where(b.absolute_path)}: {b.message}")
        raise ConfigError("invalid configuration\n  " + "\n  ".join(lines))


def load_config(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


# ---------------------------------------------------------------------------
# building objects from config


def _grid(spec: dict) -> core.Grid:
    if "points" in spec:
        return core.Grid(spec["points"])
    if "linspace" in spec:
        ls = spec["linspace"]
        return core.Grid.linspace(ls["start"], ls["stop"], ls["num"])
    return core.Grid.range(spec["range"])


def _table(values, n: int, what: str) -> np.ndarray:
    try:
        arr = np.array([float(v) for v in values], dtype=np.float64)
    except ValueError:
        raise ConfigError(f"config.{what}.values: entries must be numbers or 'inf'") from None
    if arr.size != n:
        raise ConfigError(f"config.{what}.values: {arr.size} values for a grid of {n} points")
    return arr


def _grid_loss(spec: dict, grid: core.Grid) -> bounds.LossOnGrid:
    pts = grid.points if grid.points.ndim == 1 else grid.points[:, 0]
    kind = spec["kind"]
    if kind == "table":
        vals = _table(spec["values"], grid.size, "loss")
    elif kind == "quadratic":
        vals = 0.5 * spec.get("weight", 1.0) * (pts - spec["center"]) ** 2
    elif kind == "normal_model":
        vals = (pts - spec["x"]) ** 2 / (2.0 * spec.get("sigma2", 1.0))
    else:
        x, n = spec["x"], spec["n"]
        if x > n:
            raise ConfigError("config.loss: binomial x exceeds n")
        if np.any((pts < 0) | (pts > 1)):
            raise ConfigError("config.grid: a binomial loss needs grid points in [0, 1]")
        with np.errstate(divide="ignore"):
            vals = -x * np.log(pts) - (n - x) * np.log1p(-pts)
        vals = np.nan_to_num(vals, nan=np.inf)
    try:
        loss = bounds.LossOnGrid(grid, vals)
    except ValueError as exc:
        raise ConfigError(f"config.loss: {exc}") from None
    if loss.has_negative:
        warnings.warn("loss has negative entries; log Z_max may be positive", NegativeLossWarning, stacklevel=2)
    return loss


def _possibility(spec: dict | None, grid: core.Grid, base: Path, what: str) -> core.DiscretePossibility:
    if spec is None or spec["kind"] == "uniform":
        return core.DiscretePossibility.uniform(grid)
    kind = spec["kind"]
    try:
        if kind == "table":
            return core.DiscretePossibility(grid, _table(spec["values"], grid.size, what))
        if kind == "normal":
            pts = grid.points if grid.points.ndim == 1 else grid.points[:, 0]
            raw = np.exp(-((pts - spec["mu"]) ** 2) / (2.0 * spec.get("sigma2", 1.0)))
            return core.normalize_max(raw, grid)
        path = Path(spec["path"])
        path = path if path.is_absolute() else base / path
        if not path.is_file():
            raise ConfigError(f"config.{what}.path: file not found: {path}")
        f = core.DiscretePossibility.load(path)
    except (PossError, ValueError) as exc:
        raise ConfigError(f"config.{what}: {exc}") from None
    if not f.grid.same_as(grid):
        raise ConfigError(f"config.{what}.path: grid in {path} differs from config.grid")
    return core.DiscretePossibility(grid, f.values)


def _fit_loss(spec: dict, dim: int) -> varopt.RegularisedLoss:
    kind = spec["kind"]
    if kind == "quadratic":
        return varopt.quadratic_loss(spec["Q"], spec["c"])
    if kind == "normal_model":
        return varopt.normal_model_loss(spec["x"], spec.get("Sigma0", 1.0), spec.get("Sigma", 1.0))
    if kind == "binomial_model":
        return varopt.binomial_model_loss(spec["x"], spec["n"])
    return varopt.zero_loss(dim)


# ---------------------------------------------------------------------------
# output helpers


def _ext(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, float) and math.isnan(x):
        return None
    return x


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def _formats(fmt: str) -> tuple[str, ...]:
    return ("csv", "json") if fmt == "both" else (fmt,)


# ---------------------------------------------------------------------------
# commands


def cmd_posterior(cfg: dict, out: Path, fmt: str, base: Path) -> int:
    grid = _grid(cfg["grid"])
    loss = _grid_loss(cfg["loss"], grid)
    prior = _possibility(cfg.get("prior"), grid, base, "prior")
    post, log_z = bounds.maxitive_posterior(loss, prior)
    if "csv" in _formats(fmt):
        _write(out / "posterior.csv", post.to_csv())
    if "json" in _formats(fmt):
        _write(out / "posterior.json", _dump({**post.to_dict(), "log_z_max": log_z}))
    _write(out / "log_z_max.txt", repr(log_z) + "\n")
    return EXIT_OK


def cmd_bounds(cfg: dict, out: Path, fmt: str, base: Path) -> int:
    grid = _grid(cfg["grid"])
    loss = _grid_loss(cfg["loss"], grid)
    prior = _possibility(cfg.get("prior"), grid, base, "prior")
    cand_spec = cfg["candidate"]
    if cand_spec["kind"] == "posterior":
        g = bounds.maxitive_posterior(loss, prior)[0]
    else:
        g = _possibility(cand_spec, grid, base, "candidate")
    report = bounds.cbo_report(g, loss, prior, cfg.get("alpha"))
    if "json" in _formats(fmt):
        _write(out / "report.json", report.to_json() + "\n")
    if "csv" in _formats(fmt):
        rows = ["quantity,value"] + [f"{k},{'' if v is None else (repr(v) if isinstance(v, float) else v)}"
                                     for k, v in report.to_dict().items()]
        _write(out / "report.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_fit(cfg: dict, out: Path, fmt: str, base: Path) -> int:
    try:
        spec = expfam.family_from_config(cfg["family"])
        loss = _fit_loss(cfg["loss"], spec.dim_theta)
        step = varopt.StepConfig(**cfg.get("step", {}))
    except (PossError, ValueError) as exc:
        raise ConfigError(f"config: {exc}") from None
    if "lambda0" in cfg:
        lam0 = np.atleast_1d(np.asarray(cfg["lambda0"], dtype=np.float64))
    elif spec.name == "binomial":
        lam0 = np.array([spec.params["n"] / 2.0])
    elif spec.natural_param is not None:
        lam0 = spec.natural_param.copy()
    else:
        lam0 = np.zeros(spec.dim_lambda)
    if lam0.shape != (spec.dim_lambda,):
        raise ConfigError(f"config.lambda0: expected {spec.dim_lambda} values, got {lam0.size}")
    trace = varopt.run(loss, spec, lam0, step)
    trace.write(out, _formats(fmt))
    return EXIT_DIVERGED if trace.status == "Diverged" else EXIT_OK


def _threads(n_jobs: int) -> int:
    env = os.environ.get("POSSLIB_THREADS")
    if env:
        try:
            return max(1, min(n_jobs, int(env)))
        except ValueError:
            raise ConfigError(f"POSSLIB_THREADS must be an integer, got {env!r}") from None
    return max(1, min(n_jobs, os.cpu_count() or 1))


def cmd_verify(cfg: dict, out: Path, fmt: str, base: Path) -> int:
    names = cfg.get("suites", list(suites.SUITES))
    opts = suites.VerifyOptions(
        seed=cfg.get("seed", 0),
        n_instances=cfg.get("n_instances", 100),
        sizes=tuple(cfg.get("sizes", (2, 4, 16, 64))),
        n_candidates=cfg.get("n_candidates", 500),
        n_perturb=cfg.get("n_perturb", 20),
        trials=cfg.get("trials", 100),
        tolerance=cfg.get("tolerance"),
    )
    with ThreadPoolExecutor(max_workers=_threads(len(names))) as pool:
        results = list(pool.map(lambda n: suites.run_suite(n, opts), names))
    summary = {"pass": all(r.passed for r in results), "seed": opts.seed, "suites": {}}
    for r in results:
        if "csv" in _formats(fmt):
            _write(out / f"{r.name}.csv", r.to_csv())
        summary["suites"][r.name] = {"pass": r.passed, "tolerance": r.tol, "worst": _ext(float(r.worst))}
        print(f"{r.name:<14} {'PASS' if r.passed else 'FAIL'}  worst={float(r.worst):.3g}  tol={r.tol:g}")
    if "json" in _formats(fmt):
        _write(out / "verify.json", _dump(summary))
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failing suites: {', '.join(failed)}", file=sys.stderr)
        return EXIT_SUITE
    return EXIT_OK


COMMANDS = {"posterior": cmd_posterior, "bounds": cmd_bounds, "fit": cmd_fit, "verify": cmd_verify}


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="posslib", description="Maxitive posteriors, consistency bounds and their optimisation.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "posterior": "maxitive posterior and log-consistency on a grid",
        "bounds": "lower/upper consistency bounds of a candidate",
        "fit": "optimise the lower bound within a conjugate family",
        "verify": "run the verification suites",
    }
    for name, h in helps.items():
        s = sub.add_parser(name, help=h)
        s.add_argument("--config", required=True, type=Path, help="JSON configuration file")
        s.add_argument("--out", type=Path, default=Path("out"), help="output directory (default ./out)")
        s.add_argument("--seed", type=_u64, help="overrides the seed in the config")
        s.add_argument("--format", choices=("csv", "json", "both"), default="both")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        validate_config(args.command, cfg)
        if args.seed is not None:
            cfg["seed"] = args.seed
        args.out.mkdir(parents=True, exist_ok=True)
        _write(args.out / "config.json", _dump(cfg))
        with warnings.catch_warnings():
            warnings.simplefilter("always", NegativeLossWarning)
            warnings.showwarning = _show_warning
            return COMMANDS[args.command](cfg, args.out, args.format, args.config.parent)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Inconsistent as exc:
        print(f"inconsistent: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except PossError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
