"""Command-line front end: CSV ingestion, subcommands, CSV/JSON emission.

Subcommands: fit, sweep, select, simulate, oracle-check.  Input samples are
CSV with header ``y,x,z,d`` (outcome, covariate label, protected group label,
1-based treatment index).  x and z are strings mapped to ordered levels by
first appearance; K defaults to the largest observed treatment index.  The
support [a, b] defaults to [0, 1]; ``--rescale`` min-max rescales outcomes to
[0, 1] instead.

Outputs are written atomically (temp file + rename) and are byte-identical
across runs with the same seed.  stdout stays quiet; diagnostics go to
stderr.  Exit codes: 0 ok, 1 self-test failure, 2 CSV parse error, 3 schema
violation, 4 optimizer failure, 5 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from .distributions import SupportInterval
from .estimation import TrainingSample, fit_plugin
from .functionals import SimilarityMeasure, TargetFunctional
from .objective import DecisionRule, omega
from .optimizer import NonFiniteObjective, OptimizerConfig, maximize
from .selection import (
    BudgetSelection,
    LambdaGrid,
    LambdaPath,
    PathEntry,
    select_lambda_budget,
    sweep,
)
from .simharness import SimConfig, run_simulation
from .toy import (
    PENALTY_SCALE,
    ToyParams,
    toy_cond_array,
    toy_max_value,
    toy_objective,
    toy_space,
    toy_threshold,
)

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_PARSE = 2
EXIT_SCHEMA = 3
EXIT_OPTIMIZER = 4
EXIT_CONFIG = 5

SAMPLE_HEADER = ["y", "x", "z", "d"]


class ParseError(Exception):
    """Malformed CSV: bad header, wrong field count, unparseable value."""


class SchemaError(Exception):
    """Well-formed input violating the schema (support, treatment range, levels)."""


class ConfigError(Exception):
    """Missing or inconsistent command configuration."""


# ---------------------------------------------------------------------------
# sample CSV

def read_sample_csv(path: str, support: SupportInterval, k: int | None = None,
                    x_levels=None, z_levels=None, drop_empty_x: bool = False,
                    rescale: bool = False) -> TrainingSample:
    """Load a training sample, mapping labels to levels by first appearance."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if header != SAMPLE_HEADER:
        raise ParseError(f"{path}: row 1: header must be {','.join(SAMPLE_HEADER)}")
    ys, xs, zs, ds = [], [], [], []
    for idx, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ParseError(f"{path}: row {idx}: expected 4 fields, got {len(row)}")
        try:
            y = float(row[0])
        except ValueError:
            raise ParseError(f"{path}: row {idx}: cannot parse y={row[0]!r}") from None
        try:
            d = int(row[3])
        except ValueError:
            raise ParseError(f"{path}: row {idx}: cannot parse d={row[3]!r}") from None
        if d < 1:
            raise SchemaError(f"{path}: row {idx}: treatment index {d} must be >= 1")
        ys.append(y)
        xs.append(row[1])
        zs.append(row[2])
        ds.append(d)
    if not ys:
        raise SchemaError(f"{path}: no data rows")
    y_arr = np.array(ys)
    if rescale:
        lo, hi = float(y_arr.min()), float(y_arr.max())
        if hi <= lo:
            raise SchemaError(f"{path}: cannot rescale a constant outcome column")
        y_arr = (y_arr - lo) / (hi - lo)
        support = SupportInterval(0.0, 1.0)
    bad = np.flatnonzero((y_arr < support.a) | (y_arr > support.b))
    if bad.size:
        row = int(bad[0]) + 2
        raise SchemaError(
            f"{path}: row {row}: y={float(y_arr[bad[0]])!r} outside support "
            f"[{support.a}, {support.b}]"
        )
    k_eff = k if k is not None else max(2, max(ds))
    bad_d = [i for i, d in enumerate(ds) if d > k_eff]
    if bad_d:
        raise SchemaError(
            f"{path}: row {bad_d[0] + 2}: treatment index {ds[bad_d[0]]} exceeds K={k_eff}"
        )
    if x_levels is not None:
        unknown = [i for i, x in enumerate(xs) if x not in set(x_levels)]
        if unknown:
            raise SchemaError(
                f"{path}: row {unknown[0] + 2}: unknown x level {xs[unknown[0]]!r}"
            )
        if drop_empty_x:
            seen = set(xs)
            x_levels = [x for x in x_levels if x in seen]
    if z_levels is not None:
        unknown = [i for i, z in enumerate(zs) if z not in set(z_levels)]
        if unknown:
            raise SchemaError(
                f"{path}: row {unknown[0] + 2}: unknown z level {zs[unknown[0]]!r}"
            )
    space = None
    if x_levels is not None or z_levels is not None:
        from .objective import CovariateSpace

        space = CovariateSpace(
            tuple(x_levels) if x_levels is not None else tuple(dict.fromkeys(xs)),
            tuple(z_levels) if z_levels is not None else tuple(dict.fromkeys(zs)),
            k_eff,
        )
    return TrainingSample.from_columns(y_arr, xs, zs, ds, support, space=space, k=None if space else k_eff)


def write_sample_csv(path: str, sample: TrainingSample) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SAMPLE_HEADER)
    xl, zl = sample.space.x_levels, sample.space.z_levels
    for y, xi, zi, d in zip(sample.ys, sample.xi, sample.zi, sample.d):
        writer.writerow([repr(float(y)), xl[xi], zl[zi], int(d)])
    _atomic_write(path, buf.getvalue())


# ---------------------------------------------------------------------------
# emission helpers

def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path: str, payload) -> None:
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")


def _num(value: float) -> str:
    return repr(float(value))


def fitted_array_payload(arr) -> dict:
    space = arr.space
    cells = []
    for i in space.treatments:
        for x in space.x_levels:
            for z in space.z_levels:
                cdf = arr.cdf[(i, x, z)]
                empty = cdf.points.size == 1 and cdf.points[0] == arr.support.b
                cells.append(
                    {
                        "d": int(i),
                        "x": str(x),
                        "z": str(z),
                        "points": [float(p) for p in cdf.points],
                        "masses": [float(m) for m in cdf.masses],
                        "empty_cell": bool(empty),
                    }
                )
    return {
        "support": [arr.support.a, arr.support.b],
        "x_levels": [str(x) for x in space.x_levels],
        "z_levels": [str(z) for z in space.z_levels],
        "k": space.k,
        "cells": cells,
        "pxz": [
            {"x": str(x), "z": str(z), "p": float(arr.pxz[(x, z)])}
            for x in space.x_levels
            for z in space.z_levels
        ],
    }


def path_csv_text(path: LambdaPath) -> str:
    groups = list(path.entries[0].unfairness)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["lambda", "obj_value", "target_value"]
        + [f"unfair_{z}" for z in groups]
        + ["max_unfairness"]
    )
    for lam, entry in zip(path.grid, path.entries):
        writer.writerow(
            [_num(lam), _num(entry.obj_value), _num(entry.target_value)]
            + [_num(entry.unfairness[z]) for z in groups]
            + [_num(entry.max_unfairness)]
        )
    return buf.getvalue()


def rules_payload(path: LambdaPath) -> dict:
    space = path.entries[0].rule.space
    return {
        "n": path.n,
        "x_levels": [str(x) for x in space.x_levels],
        "k": space.k,
        "lambdas": [float(lam) for lam in path.grid],
        "rules": [[list(map(float, row)) for row in e.rule.probs] for e in path.entries],
    }


def selection_payload(selection: BudgetSelection, rule: DecisionRule | None) -> dict:
    return {
        "beta": selection.beta,
        "c_n": selection.c_n,
        "threshold": selection.threshold,
        "chosen_lambda": selection.chosen_lambda,
        "deltas": [
            {"lambda": float(lam), "delta": float(d)} for lam, d in selection.deltas.items()
        ],
        "chosen_rule": [list(map(float, row)) for row in rule.probs] if rule is not None else [],
    }


# ---------------------------------------------------------------------------
# subcommands

def _ensure_outdir(args) -> str:
    out = args.output_dir
    if not out:
        raise ConfigError("--output-dir is required")
    os.makedirs(out, exist_ok=True)
    return out


def _support(args) -> SupportInterval:
    a, b = args.support
    return SupportInterval(a, b)


def _read_sample(args) -> TrainingSample:
    if not args.input:
        raise ConfigError("--input is required")
    return read_sample_csv(
        args.input,
        _support(args),
        k=args.k,
        x_levels=args.x_levels.split(",") if args.x_levels else None,
        z_levels=args.z_levels.split(",") if args.z_levels else None,
        drop_empty_x=args.drop_empty_x,
        rescale=args.rescale,
    )


def _optimizer_config(args) -> OptimizerConfig:
    return OptimizerConfig(
        restarts=args.restarts,
        candidate_starts=args.candidate_starts,
        max_iters=args.max_iters,
        ftol=args.ftol,
        seed=args.seed,
    )


def cmd_fit(args) -> int:
    out = _ensure_outdir(args)
    arr = fit_plugin(_read_sample(args))
    _write_json(os.path.join(out, "fitted_array.json"), fitted_array_payload(arr))
    return EXIT_OK


def _run_sweep(args) -> LambdaPath:
    sample = _read_sample(args)
    grid = LambdaGrid.uniform(args.grid_m)
    t = TargetFunctional.parse(args.target)
    s = SimilarityMeasure.parse(args.similarity)
    if args.estimator == "ipw":
        raise ConfigError("estimator 'ipw' needs a propensity model; use the library API")
    return sweep(sample, grid, t, s, _optimizer_config(args), estimator=args.estimator)


def cmd_sweep(args) -> int:
    out = _ensure_outdir(args)
    path = _run_sweep(args)
    _atomic_write(os.path.join(out, "path.csv"), path_csv_text(path))
    _write_json(os.path.join(out, "rules.json"), rules_payload(path))
    return EXIT_OK


def _read_path_files(path_csv: str, rules_json: str) -> tuple[LambdaPath, list]:
    """Rebuild a LambdaPath (diagnostics + rules) from sweep outputs."""
    try:
        with open(rules_json) as fh:
            rules_doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {rules_json}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{rules_json}: {exc}") from None
    try:
        with open(path_csv, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path_csv}: {exc}") from None
    if not rows or not rows[0] or rows[0][0] != "lambda":
        raise ParseError(f"{path_csv}: row 1: not a path CSV")
    header = rows[0]
    groups = [c[len("unfair_"):] for c in header if c.startswith("unfair_")]
    space_cols = rules_doc["x_levels"]
    z_for_space = groups or ["z0", "z1"]
    from .objective import CovariateSpace

    space = CovariateSpace(tuple(space_cols), tuple(z_for_space), int(rules_doc["k"]))
    entries = []
    lams = []
    for idx, row in enumerate(rows[1:]):
        try:
            lam = float(row[0])
            obj_value = float(row[1])
            target_value = float(row[2])
            unf = {z: float(v) for z, v in zip(groups, row[3:3 + len(groups)])}
            max_unf = float(row[3 + len(groups)])
        except (ValueError, IndexError):
            raise ParseError(f"{path_csv}: row {idx + 2}: malformed row") from None
        rule = DecisionRule(space, np.array(rules_doc["rules"][idx], dtype=float))
        lams.append(lam)
        entries.append(PathEntry(rule, obj_value, target_value, unf, max_unf))
    path = LambdaPath(LambdaGrid(tuple(lams)), tuple(entries), int(rules_doc["n"]))
    return path, entries


def cmd_select(args) -> int:
    out = _ensure_outdir(args)
    if args.beta is None:
        raise ConfigError("--beta is required for select")
    if args.path_csv and args.rules_json:
        path, _ = _read_path_files(args.path_csv, args.rules_json)
    elif args.input:
        path = _run_sweep(args)
    else:
        raise ConfigError("select needs either --path-csv with --rules-json, or --input")
    selection = select_lambda_budget(path, args.beta)
    rule = path.entry(selection.chosen_lambda).rule
    _write_json(os.path.join(out, "selection.json"), selection_payload(selection, rule))
    return EXIT_OK


def replications_csv_text(result) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "mechanism", "lambda", "replication", "delta_hat", "emp_value", "regret"])
    for r in result.rows:
        writer.writerow(
            [r.n, r.mechanism, _num(r.lam), r.replication,
             _num(r.delta_hat), _num(r.emp_value), _num(r.regret)]
        )
    return buf.getvalue()


def aggregate_csv_text(result) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    metrics = ("regret", "delta_hat", "emp_value")
    header = ["n", "mechanism", "lambda"]
    for name in metrics:
        header += [f"mean_{name}", f"sd_{name}", f"median_{name}"]
    writer.writerow(header)
    aggregates = result.aggregates()
    for n in result.config.sample_sizes:
        for mech in result.config.mechanisms:
            for lam in result.config.grid:
                cell = aggregates[(n, mech, lam)]
                row = [n, mech, _num(lam)]
                for name in metrics:
                    agg = cell[name]
                    row += [_num(agg.mean), _num(agg.sd), _num(agg.median)]
                writer.writerow(row)
    return buf.getvalue()


def cmd_simulate(args) -> int:
    out = _ensure_outdir(args)
    try:
        cfg = SimConfig(
            sample_sizes=tuple(int(v) for v in args.sample_sizes.split(",")),
            mechanisms=tuple(args.mechanisms.split(",")),
            grid=LambdaGrid.uniform(args.grid_m),
            replications=args.replications,
            p=args.p,
            seed=args.seed,
            optimizer=_optimizer_config(args),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    result = run_simulation(cfg)
    _atomic_write(os.path.join(out, "replications.csv"), replications_csv_text(result))
    _atomic_write(os.path.join(out, "aggregate.csv"), aggregate_csv_text(result))
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle self-test

def oracle_check(p: float = 0.75, grid_points: int = 2000, perturb: float = 0.0,
                 seed: int = 0, stream=None) -> int:
    """Closed-form vs numeric agreement suite; one report line per check.

    `perturb` shifts the closed-form objective and exists as a negative
    control for the suite itself.
    """
    stream = stream if stream is not None else sys.stderr
    checks = []

    ys = np.linspace(0.0, 1.0, 200001)[1:-1]
    numeric_scale = float((ys * (1.0 - ys**3)).max())
    checks.append(
        ("penalty constant sup y(1-y^3)", abs(numeric_scale - PENALTY_SCALE), 1e-6)
    )

    arr = toy_cond_array(p, grid_points)
    t = TargetFunctional("gini-welfare")
    s = SimilarityMeasure("ks")
    space = toy_space()
    worst = 0.0
    for lam in np.linspace(0.0, 1.0, 5):
        for delta in np.linspace(0.0, 1.0, 21):
            rule = DecisionRule(space, np.array([[delta, 1.0 - delta]]))
            num = omega(rule, arr, float(lam), t, s)
            closed = toy_objective(float(delta), ToyParams(p, float(lam))) + perturb
            worst = max(worst, abs(num - closed))
    checks.append(("objective agreement on 21x5 grid", worst, 0.01))

    c = toy_threshold(p)
    gap = abs(toy_objective(0.0, ToyParams(p, c)) - toy_objective(0.5, ToyParams(p, c)))
    checks.append(("argmax branch equality at c(p)", gap, 1e-10))

    lo = toy_max_value(ToyParams(p, c))
    hi = (89.0 / 560.0) * (1.0 - c)
    checks.append(("value continuity at c(p)", abs(lo - hi), 1e-10))

    cfg = OptimizerConfig(seed=seed)
    for lam, target_delta, tol, label in (
        (c / 2.0, 0.0, 0.01, "argmax recovery below c(p)"),
        ((c + 1.0) / 2.0, 0.5, 0.02, "argmax recovery above c(p)"),
    ):
        res = maximize(
            lambda rule: toy_objective(float(rule.probs[0, 0]), ToyParams(p, lam)),
            space,
            cfg,
        )
        checks.append((label, abs(float(res.rule.probs[0, 0]) - target_delta), tol))

    failed = False
    for name, err, tol in checks:
        ok = err <= tol
        failed |= not ok
        print(f"[{'ok' if ok else 'FAIL'}] {name}: error {err:.3e} (tolerance {tol:.0e})",
              file=stream)
    return EXIT_SELFTEST if failed else EXIT_OK


def cmd_oracle_check(args) -> int:
    return oracle_check(
        p=args.p, grid_points=args.grid_points, perturb=args.self_test_perturb, seed=args.seed
    )


# ---------------------------------------------------------------------------
# parser and entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairpolicy",
        description="Fairness-penalized treatment rules: fit, sweep, select, simulate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key=value file; flags override its entries")
        p.add_argument("--output-dir", help="directory for output files")
        p.add_argument("--seed", type=int, default=0)

    def add_sample_flags(p):
        p.add_argument("--input", help="sample CSV with header y,x,z,d")
        p.add_argument("--support", type=float, nargs=2, default=[0.0, 1.0],
                       metavar=("A", "B"))
        p.add_argument("--rescale", action="store_true",
                       help="min-max rescale outcomes to [0, 1]")
        p.add_argument("--k", type=int, default=None,
                       help="number of treatments (default: max observed d)")
        p.add_argument("--x-levels", default=None, help="comma-separated x levels")
        p.add_argument("--z-levels", default=None, help="comma-separated z levels")
        p.add_argument("--drop-empty-x", action="store_true",
                       help="drop overridden x levels with no observations")

    def add_optimizer_flags(p):
        p.add_argument("--restarts", type=int, default=1)
        p.add_argument("--candidate-starts", type=int, default=50)
        p.add_argument("--max-iters", type=int, default=500)
        p.add_argument("--ftol", type=float, default=1e-8)

    def add_objective_flags(p):
        p.add_argument("--target", default="gini-welfare",
                       help="gini-welfare | mean | quantile:TAU")
        p.add_argument("--similarity", default="ks",
                       help="ks | one-sided-ks | abs-target-diff:TARGET")
        p.add_argument("--grid-m", type=int, default=49,
                       help="uniform grid {0, 1/m, ..., 1}")
        p.add_argument("--estimator", default="plugin",
                       choices=["plugin", "ipw-estimated"])

    p_fit = sub.add_parser("fit", help="fit the plug-in conditional-CDF array")
    add_common(p_fit)
    add_sample_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_sweep = sub.add_parser("sweep", help="fit rules for a grid of preference parameters")
    add_common(p_sweep)
    add_sample_flags(p_sweep)
    add_objective_flags(p_sweep)
    add_optimizer_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_select = sub.add_parser("select", help="budget-based preference-parameter choice")
    add_common(p_select)
    add_sample_flags(p_select)
    add_objective_flags(p_select)
    add_optimizer_flags(p_select)
    p_select.add_argument("--beta", type=float, default=None,
                          help="maximal tolerated target drop")
    p_select.add_argument("--path-csv", default=None, help="path.csv from a sweep")
    p_select.add_argument("--rules-json", default=None, help="rules.json from a sweep")
    p_select.set_defaults(func=cmd_select)

    p_sim = sub.add_parser("simulate", help="Monte Carlo replications on the toy example")
    add_common(p_sim)
    add_optimizer_flags(p_sim)
    p_sim.add_argument("--sample-sizes", default="100,1000,10000")
    p_sim.add_argument("--mechanisms", default="A1,A2")
    p_sim.add_argument("--grid-m", type=int, default=49)
    p_sim.add_argument("--replications", type=int, default=100)
    p_sim.add_argument("--p", type=float, default=0.75)
    p_sim.set_defaults(func=cmd_simulate)

    p_oracle = sub.add_parser("oracle-check", help="closed-form vs numeric self-test")
    add_common(p_oracle)
    p_oracle.add_argument("--p", type=float, default=0.75)
    p_oracle.add_argument("--grid-points", type=int, default=2000)
    p_oracle.add_argument("--self-test-perturb", type=float, default=0.0,
                          help=argparse.SUPPRESS)
    p_oracle.set_defaults(func=cmd_oracle_check)

    return parser


def _load_config_file(path: str) -> list[str]:
    """Turn key=value lines into synthetic CLI flags (flags given later win)."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    flags = []
    for idx, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {idx}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                flags.append(flag)
        elif key == "support":
            flags.extend([flag] + value.split())
        else:
            flags.extend([flag, value])
    return flags


def _expand_config(argv: list[str]) -> list[str]:
    if not argv:
        return argv
    out = list(argv)
    for i, token in enumerate(out):
        if token == "--config" and i + 1 < len(out):
            path = out[i + 1]
            rest = out[:i] + out[i + 2:]
            return rest[:1] + _load_config_file(path) + rest[1:]
        if token.startswith("--config="):
            path = token.split("=", 1)[1]
            rest = out[:i] + out[i + 1:]
            return rest[:1] + _load_config_file(path) + rest[1:]
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _expand_config(argv)
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except NonFiniteObjective as exc:
        print(f"optimizer error: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZER
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
