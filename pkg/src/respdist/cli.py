"""Command-line front end: run active-learning studies and compare curves.

Exit codes (stable):
  0  all runs converged
  2  at least one run hit max_iterations without converging
  3  unknown problem name
  4  invalid configuration (file or --set override)
  5  simulator failure / external-protocol violation
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bal, problems
from .stats import Marginal

__all__ = ["main", "build_config", "write_curves_csv", "read_curves_csv",
           "compare_curves"]

CURVE_COLUMNS = ("y", "mean_cdf", "mean_ccdf", "mean_pdf", "sigma_bar",
                 "cov_cdf", "cov_ccdf", "var_mean_cdf", "var_sigma_bar")

_FLOAT_FIELDS_GA = {"crossover_rate", "mutation_rate"}
_INT_FIELDS_GA = {"population", "generations", "elitism", "restarts"}


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


class ConfigError(ValueError):
    pass


def _coerce(cfg_obj, key: str, value):
    fields = {f.name: f for f in dataclasses.fields(cfg_obj)}
    if key not in fields:
        raise ConfigError(f"unknown config field {key!r}")
    current = getattr(cfg_obj, key)
    if isinstance(current, bool):
        if isinstance(value, str):
            value = value.lower() in ("1", "true", "yes", "on")
        setattr(cfg_obj, key, bool(value))
    elif isinstance(current, int):
        setattr(cfg_obj, key, int(float(value)))
    elif isinstance(current, float):
        setattr(cfg_obj, key, float(value))
    else:
        raise ConfigError(f"cannot set structured field {key!r} directly")


def build_config(config_path: str | None, overrides) -> bal.ALConfig:
    """ALConfig from an optional JSON file plus --set key=value overrides.

    Keys mirror the config dataclass field names; 'lambda' is accepted as
    an alias for 'lam'; GA fields are addressed as ga.<field>.
    """
    cfg = bal.ALConfig()
    items = []
    if config_path:
        try:
            data = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a JSON object")
        for k, v in data.items():
            if k == "ga" and isinstance(v, dict):
                items.extend((f"ga.{gk}", gv) for gk, gv in v.items())
            else:
                items.append((k, v))
    for spec in overrides or ():
        if "=" not in spec:
            raise ConfigError(f"--set expects key=value, got {spec!r}")
        k, v = spec.split("=", 1)
        items.append((k.strip(), v.strip()))
    for key, value in items:
        if key == "lambda":
            key = "lam"
        if key.startswith("ga."):
            _coerce(cfg.ga, key[3:], value)
        else:
            _coerce(cfg, key, value)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def write_curves_csv(path: Path, curves) -> None:
    rows = [",".join(CURVE_COLUMNS)]
    data = (curves.grid.y, curves.mean_cdf, curves.mean_ccdf, curves.mean_pdf,
            curves.sigma_bar, curves.cov_cdf, curves.cov_ccdf,
            curves.var_mean_cdf, curves.var_sigma_bar)
    for t in range(curves.grid.y.size):
        rows.append(",".join(_fmt(col[t]) for col in data))
    path.write_text("\n".join(rows) + "\n")


def read_curves_csv(path: Path) -> dict:
    lines = Path(path).read_text().strip().splitlines()
    if not lines:
        raise ConfigError(f"empty curves file {path}")
    header = lines[0].split(",")
    cols = {name: [] for name in header}
    for line in lines[1:]:
        for name, cell in zip(header, line.split(",")):
            cols[name].append(float(cell))
    return {name: np.asarray(vals) for name, vals in cols.items()}


def write_trace_csv(path: Path, trace: bal.RunTrace, d: int) -> None:
    header = ["iteration", "n", "y_star", "max_H"]
    header += [f"x{j + 1}" for j in range(d)]
    header += ["acquired_y", "wall_time_ms"]
    rows = [",".join(header)]
    for i, rec in enumerate(trace.iterations):
        cells = [str(i), str(rec.n), _fmt(rec.y_star), _fmt(rec.max_H)]
        if rec.acquired_x is None:
            cells += ["nan"] * (d + 1)
        else:
            cells += [_fmt(v) for v in rec.acquired_x]
            cells += [_fmt(rec.acquired_y)]
        cells.append(_fmt(rec.wall_time * 1000.0))
        rows.append(",".join(cells))
    path.write_text("\n".join(rows) + "\n")


def compare_curves(curves: dict, ref_y, ref_cdf, ref_pdf=None):
    """Error metrics of estimated curves against a reference on its grid."""
    y = curves["y"]
    ref_cdf_i = np.interp(y, ref_y, ref_cdf)
    err_cdf = curves["mean_cdf"] - ref_cdf_i
    metrics = {
        "max_abs_cdf_error": float(np.max(np.abs(err_cdf))),
        "ks_distance": float(np.max(np.abs(err_cdf))),
    }
    per_point = {"y": y, "cdf_error": err_cdf}
    if ref_pdf is not None:
        ref_pdf_i = np.interp(y, ref_y, ref_pdf)
        err_pdf = curves["mean_pdf"] - ref_pdf_i
        metrics["max_abs_pdf_error"] = float(np.max(np.abs(err_pdf)))
        per_point["pdf_error"] = err_pdf
    return metrics, per_point


def _resolve_problem(args) -> problems.ProblemSpec:
    if args.external_sim:
        if not args.marginals:
            raise ConfigError("--external-sim requires --marginals")
        margs = []
        for spec in args.marginals.split(";"):
            kind, p1, p2 = spec.split(",")
            margs.append(Marginal(kind.strip(), float(p1), float(p2)))
        return problems.external_problem(args.external_sim, margs)
    if not args.problem:
        raise ConfigError("either --problem or --external-sim is required")
    return problems.get_problem(args.problem)


def _execute_run(problem_name: str, cfg_dict: dict, ga_dict: dict, seed: int):
    cfg = bal.ALConfig(**cfg_dict, ga=bal.GAConfig(**ga_dict), seed=seed)
    problem = problems.get_problem(problem_name)
    return bal.run(problem, cfg)


def _cfg_dicts(cfg: bal.ALConfig):
    d = dataclasses.asdict(cfg)
    ga = d.pop("ga")
    d.pop("seed")
    return d, ga


def _sample_cov(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2 or values.mean() == 0.0:
        return 0.0
    return float(values.std(ddof=1) / values.mean())


def _cmd_run(args) -> int:
    try:
        cfg = build_config(args.config, args.set)
        problem = _resolve_problem(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 3

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = [args.seed + i for i in range(args.runs)]

    traces = []
    try:
        if args.jobs > 1 and not args.external_sim:
            cfg_d, ga_d = _cfg_dicts(cfg)
            with concurrent.futures.ProcessPoolExecutor(args.jobs) as pool:
                futs = [pool.submit(_execute_run, problem.name, cfg_d, ga_d, s)
                        for s in seeds]
                traces = [f.result() for f in futs]
        else:
            for s in seeds:
                run_cfg = dataclasses.replace(cfg, seed=s)
                traces.append(bal.run(problem, run_cfg))
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5

    d = problem.dimension
    write_curves_csv(out_dir / "curves.csv", traces[0].final_curves)
    write_trace_csv(out_dir / "trace.csv", traces[0], d)
    if args.runs > 1:
        for i, tr in enumerate(traces):
            sub = out_dir / "runs" / f"run{i:02d}"
            sub.mkdir(parents=True, exist_ok=True)
            write_curves_csv(sub / "curves.csv", tr.final_curves)
            write_trace_csv(sub / "trace.csv", tr, d)

    report = _build_report(problem, cfg, seeds, traces)
    (out_dir / "report.txt").write_text(report)
    print(report)
    return 0 if all(t.converged for t in traces) else 2


def _build_report(problem, cfg, seeds, traces) -> str:
    calls = np.array([t.total_calls for t in traces], dtype=float)
    lines = [
        f"problem: {problem.name} (d={problem.dimension})",
        f"runs: {len(traces)}  pool N: {cfg.N}  n0: {cfg.n0}  "
        f"epsilon: {cfg.epsilon}  seed base: {seeds[0]}",
        "",
        "per-run results:",
    ]
    for i, tr in enumerate(traces):
        g = tr.final_curves.grid
        lines.append(
            f"  run {i:02d}: seed={seeds[i]} calls={tr.total_calls} "
            f"converged={tr.converged} iterations={len(tr.iterations)} "
            f"y_range=[{g.y_min:.6g}, {g.y_max:.6g}]"
        )
    lines += [
        "",
        f"total g-calls: mean = {calls.mean():.4f}, "
        f"CoV = {100.0 * _sample_cov(calls):.2f}%",
        f"converged runs: {sum(t.converged for t in traces)}/{len(traces)}",
    ]

    # ensemble curve statistics on the first run's grid
    base_y = traces[0].final_curves.grid.y
    stacks = {}
    for attr in ("mean_cdf", "mean_ccdf", "mean_pdf", "cov_cdf", "cov_ccdf"):
        rows = [np.interp(base_y, t.final_curves.grid.y,
                          getattr(t.final_curves, attr)) for t in traces]
        stacks[attr] = np.vstack(rows)
    lines.append("")
    lines.append("curve ensemble (pointwise across runs, first-run grid):")
    for attr, stack in stacks.items():
        lines.append(
            f"  {attr}: mean-curve range [{stack.mean(axis=0).min():.6g}, "
            f"{stack.mean(axis=0).max():.6g}], max pointwise std "
            f"{stack.std(axis=0, ddof=1).max() if len(traces) > 1 else 0.0:.6g}"
        )

    if problem.reference is not None:
        lines.append("")
        lines.append("reference comparison (analytical):")
        for i, tr in enumerate(traces):
            y = tr.final_curves.grid.y
            ref_cdf, _, ref_pdf = problem.reference(y)
            max_cdf = float(np.max(np.abs(tr.final_curves.mean_cdf - ref_cdf)))
            max_pdf = float(np.max(np.abs(tr.final_curves.mean_pdf - ref_pdf)))
            lines.append(
                f"  run {i:02d}: max|CDF err| = {max_cdf:.6g} "
                f"(KS), max|PDF err| = {max_pdf:.6g}"
            )
    return "\n".join(lines) + "\n"


def _cmd_compare(args) -> int:
    try:
        curves = read_curves_csv(Path(args.curves))
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    y = curves["y"]
    if args.against_csv:
        other = read_curves_csv(Path(args.against_csv))
        metrics, per_point = compare_curves(
            curves, other["y"], other["mean_cdf"], other["mean_pdf"])
    elif args.reference == "analytical":
        try:
            problem = problems.get_problem(args.problem)
        except KeyError as exc:
            print(f"error: {exc.args[0]}", file=sys.stderr)
            return 3
        if problem.reference is None:
            print(f"error: problem {problem.name!r} has no analytical reference",
                  file=sys.stderr)
            return 4
        ref_cdf, _, ref_pdf = problem.reference(y)
        metrics, per_point = compare_curves(curves, y, ref_cdf, ref_pdf)
    else:
        try:
            problem = problems.get_problem(args.problem)
        except KeyError as exc:
            print(f"error: {exc.args[0]}", file=sys.stderr)
            return 3
        pad = 0.05 * (y[-1] - y[0])
        ref_grid = np.linspace(y[0] - pad, y[-1] + pad, 4 * y.size)
        g, cdf, _, pdf, _ = problems.mcs_reference(
            problem, args.mcs_samples, args.seed, grid=ref_grid)
        metrics, per_point = compare_curves(curves, g, cdf, pdf)

    for k, v in metrics.items():
        print(f"{k} = {_fmt(v)}")
    if args.out:
        header = ",".join(per_point)
        rows = [header]
        npts = len(per_point["y"])
        for t in range(npts):
            rows.append(",".join(_fmt(per_point[k][t]) for k in per_point))
        Path(args.out).write_text("\n".join(rows) + "\n")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="respdist",
        description="Active-learning estimation of response probability "
                    "distributions of expensive simulators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one or more learning runs")
    p_run.add_argument("--problem", help="registered problem name")
    p_run.add_argument("--external-sim", help="external simulator command")
    p_run.add_argument("--marginals",
                       help="semicolon list kind,p1,p2 for --external-sim")
    p_run.add_argument("--config", help="JSON config file")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config field (repeatable)")
    p_run.add_argument("--runs", type=int, default=1)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--out-dir", default="out")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="compare curves against a reference")
    p_cmp.add_argument("--curves", required=True, help="curves.csv to check")
    p_cmp.add_argument("--problem", help="registered problem name")
    p_cmp.add_argument("--reference", choices=("analytical", "mcs"),
                       default="analytical")
    p_cmp.add_argument("--against-csv", help="compare against another curves.csv")
    p_cmp.add_argument("--mcs-samples", type=int, default=1_000_000)
    p_cmp.add_argument("--seed", type=int, default=0)
    p_cmp.add_argument("--out", help="write per-grid-point errors as CSV")
    p_cmp.set_defaults(func=_cmd_compare)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
