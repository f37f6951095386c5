"""Command-line entry point.

Exit codes: 0 when every rule of the run passes, 1 when a rule fails or a
path violates the drawdown constraint, 2 for bad flags or configuration.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, ExperimentConfig, ModelConfig, load_config
from .errors import ConstraintViolationError, InvalidInputError, NoNumeraireError, SimulationError
from .experiments import RUNNERS, ExperimentReport, map_paths
from .paths import read_path_csv, write_path_csv
from .selftest import run_selftest
from .transform import az_forward, az_inverse, verify_drawdown


EXPERIMENTS = ("growth", "zeta-law", "oscillation", "drawdown-race", "turnpike", "numeraire-test")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI file with [model], [experiment] and [output] sections")
    p.add_argument("--model", choices=["gbm", "dds"], help="model preset (overrides the config)")
    p.add_argument("--alpha", type=float, help="drawdown floor as a fraction of the running maximum")
    p.add_argument("--alphas", type=_float_list, help="several floors, comma separated")
    p.add_argument("--level", type=float, help="log-level l of the hitting time tau_l")
    p.add_argument("--n-paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    p.add_argument("--out", help="output directory")
    p.add_argument("--dump-samples", action="store_true", help="also write per-sample CSV")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddkelly",
        description="Drawdown-constrained Kelly portfolios: simulation and Monte Carlo checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate price paths and the numeraire portfolio")
    _common(p)

    p = sub.add_parser("transform", help="apply the drawdown transform to a path CSV")
    p.add_argument("input", help="CSV with header t,value")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--inverse", action="store_true", help="map a constrained path back")
    p.add_argument("--verify", action="store_true", help="check the output against the floor")
    p.add_argument("--out", help="output CSV (default: stdout)")

    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        _common(p)
        if name == "numeraire-test":
            p.add_argument("--strategy",
                           help="baseline, buyhold, halfkelly, all, or a CSV of constant proportions")
        if name == "zeta-law":
            p.add_argument("--max-n", type=int, help="cycles harvested per path")
        if name == "turnpike":
            p.add_argument("--n-list", type=_int_list, help="cycle indices, comma separated")

    p = sub.add_parser("selftest", help="check every exact pathwise identity")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", help="output directory for selftest.csv")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    if args.model is not None:
        cfg = replace(cfg, model=ModelConfig(preset=args.model))
    return cfg.with_overrides(
        alpha=args.alpha, alphas=args.alphas, level=args.level, n_paths=args.n_paths,
        seed=args.seed, dt=args.dt, t_max=args.t_max, directory=args.out,
        dump_samples=True if args.dump_samples else None,
        strategy=getattr(args, "strategy", None), max_n=getattr(args, "max_n", None),
        n_list=getattr(args, "n_list", None))


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (list, tuple)):
        return " ".join(_cell(x) for x in v)
    return "" if v is None else str(v)


def write_csv(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def write_report(report: ExperimentReport, directory: str, dump: bool) -> list:
    os.makedirs(directory, exist_ok=True)
    stem = os.path.join(directory, report.name.replace("-", "_"))
    written = [stem + ".csv", stem + "_report.csv"]
    write_csv(written[0], report.columns, report.rows)
    meta = [["claim", "", report.claim]]
    meta += [["config", k, v] for k, v in report.config.items()]
    meta += [["check", k, ok] for k, ok in report.checks.items()]
    meta += [["result", "", "pass" if report.passed else "fail"]]
    write_csv(written[1], ["kind", "name", "value"], meta)
    if dump and report.samples_columns:
        written.append(stem + "_samples.csv")
        write_csv(written[-1], report.samples_columns, report.samples)
    return written


def cmd_experiment(args) -> int:
    cfg = resolve_config(args)
    report = RUNNERS[args.command](cfg, threads=args.threads)
    files = write_report(report, cfg.directory, cfg.dump_samples)
    for line in report.summary_lines():
        print(line)
    print("wrote " + ", ".join(files))
    return 0 if report.passed else 1


def cmd_simulate(args) -> int:
    cfg = resolve_config(args)
    model = cfg.model.build()
    grid = cfg.grid(0.01, 10.0)
    n = cfg.get("n_paths", 10)

    def chunk(batch):
        nb = batch.numeraire
        rows = []
        for i, pid in enumerate(batch.path_ids):
            for k in range(grid.n_steps + 1):
                rows.append([int(pid), float(k * grid.dt), *batch.prices[i, k].tolist(),
                             float(nb.wealth[i, k]), float(nb.growth[i, k])])
        return rows

    parts = map_paths(chunk, model, grid, n, cfg.seed, args.threads)
    os.makedirs(cfg.directory, exist_ok=True)
    path = os.path.join(cfg.directory, "simulate.csv")
    header = ["path_id", "t"] + [f"asset_{j + 1}" for j in range(model.d)] + ["xhat", "growth"]
    write_csv(path, header, (r for part in parts for r in part))
    print(f"simulated {n} paths of {grid.n_steps} steps; wrote {path}")
    return 0


def cmd_transform(args) -> int:
    with open(args.input, encoding="utf-8") as fh:
        path = read_path_csv(fh)
    try:
        out = az_inverse(path, args.alpha) if args.inverse else az_forward(path, args.alpha)
    except ConstraintViolationError as exc:
        print(f"constraint violation: {exc}", file=sys.stderr)
        return 1
    status = 0
    if args.verify:
        target = path if args.inverse else out
        rep = verify_drawdown(target, args.alpha)
        if rep.ok:
            print(f"drawdown floor {args.alpha} holds", file=sys.stderr)
        else:
            print(f"drawdown floor {args.alpha} violated at indices {rep.violations[:20]}",
                  file=sys.stderr)
            status = 1
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            write_path_csv(out, fh)
    else:
        write_path_csv(out, sys.stdout)
    return status


def cmd_selftest(args) -> int:
    results = run_selftest(args.seed)
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_csv(os.path.join(args.out, "selftest.csv"), ["check", "pass"],
                  [[n, ok] for n, ok, _ in results])
    return 0 if all(ok for _, ok, _ in results) else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "transform":
            return cmd_transform(args)
        if args.command == "selftest":
            return cmd_selftest(args)
        return cmd_experiment(args)
    except (ConfigError, InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NoNumeraireError, SimulationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
