"""Command-line front end: ``fixlab <subcommand> ...``.

Exit codes: 0 success, 2 domain error, 3 infeasible request (enumeration
or step cap), 4 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from fixlab import experiments
from fixlab.errors import DomainError, InfeasibleError, SchemaError
from fixlab.lattice import SAMPLERS, estimate_fixation
from fixlab.limits import g, y_first_moment, y_second_moment
from fixlab.rng import default_seed
from fixlab.solver import annealed_exact, annealed_mc, conditioned_average
from fixlab.stats import CSV_FIELDS, SIM_CSV_FIELDS, fmt_float

EXIT_DOMAIN = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

log = logging.getLogger("fixlab")


def _seed(text: str) -> int:
    return int(text, 0)


def _common(p: argparse.ArgumentParser, *, replicates: bool = False, topology: bool = False) -> None:
    p.add_argument("--n", type=int, required=True, help="number of sites")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--delta", type=float, help="fitness spread, 0 <= delta < 1")
    group.add_argument("--c", type=float, help="use delta = c / sqrt(n)")
    if topology:
        p.add_argument("--topology", choices=("line", "circle"), default="line")
    if replicates:
        p.add_argument("--replicates", type=int, default=experiments.DEFAULT_REPLICATES)
        p.add_argument("--seed", type=_seed, default=None, help="default: $FIXLAB_SEED or a fixed constant")
        p.add_argument("--jobs", type=int, default=1, help="worker threads")
    _output(p)


def _output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=None, help="write here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fixlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="annealed probability by enumerating all environments")
    _common(p)
    p = sub.add_parser("mc", help="annealed probability by Monte Carlo over environments")
    _common(p, replicates=True)
    p = sub.add_parser("conditioned", help="average over environments with equal sign sums (even n)")
    _common(p)
    p = sub.add_parser("simulate", help="site-level simulation on a line or ring")
    _common(p, replicates=True, topology=True)
    p.add_argument("--sampler", choices=SAMPLERS, default="effective")
    p.add_argument("--start", type=int, default=0, help="site of the initial mutant")

    p = sub.add_parser("limit-g", help="the scaling limit g(c)")
    p.add_argument("--c", type=float, nargs="+", help="one or more values of c")
    p.add_argument("--table", nargs=3, metavar=("CMIN", "CMAX", "POINTS"),
                   help="log-spaced table of POINTS values between CMIN and CMAX")
    _output(p)

    p = sub.add_parser("y-moments", help="first and second moments of the large-delta functional")
    p.add_argument("--M", type=float, nargs="+", required=True)
    _output(p)

    plan = sub.add_parser("plan", help="figure-reproduction sweeps")
    psub = plan.add_subparsers(dest="plan_command", required=True)
    p = psub.add_parser("run", help="run plans from a config file or a preset")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("config", nargs="?", type=Path, help="plan config file")
    src.add_argument("--preset", choices=("fig-line", "fig-infty", "fig-cycle"))
    p.add_argument("--out-dir", type=Path, default=Path("results"), help="output directory for presets")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--paper-scale", action="store_true", help=f"use {experiments.PAPER_REPLICATES} replicates")
    p.add_argument("--seed", type=_seed, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--plot", action="store_true", help="also render an SVG next to each CSV")
    p = psub.add_parser("plot", help="render a result CSV")
    p.add_argument("table", type=Path)
    p.add_argument("--out", type=Path, default=None, help="figure path (default: table path with .svg)")
    p.add_argument("--style", choices=("paper", "plain"), default="paper")
    return parser


def _delta(args) -> float:
    if args.c is not None:
        if args.n < 1:
            raise DomainError("n must be positive")
        return args.c / math.sqrt(args.n)
    return args.delta


def _emit(rows: list[dict], fields: Sequence[str], args) -> None:
    if args.format == "json":
        text = json.dumps(rows if len(rows) != 1 else rows[0], indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})
        text = buf.getvalue()
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)


def _estimate_out(est, args, fields=CSV_FIELDS) -> None:
    if args.format == "json":
        d = est.to_dict()
        d["n_mean"], d["n_std_error"] = est.scaled
        _emit([d], (), args)
    else:
        _emit([est.csv_row()], fields, args)


def cmd_exact(args) -> None:
    _estimate_out(annealed_exact(args.n, _delta(args)), args)


def cmd_conditioned(args) -> None:
    _estimate_out(conditioned_average(args.n, _delta(args)), args)


def cmd_mc(args) -> None:
    seed = default_seed() if args.seed is None else args.seed
    _estimate_out(annealed_mc(args.n, _delta(args), args.replicates, seed, jobs=args.jobs), args)


def cmd_simulate(args) -> None:
    seed = default_seed() if args.seed is None else args.seed
    est = estimate_fixation(
        args.topology, args.n, _delta(args), args.replicates, seed,
        sampler=args.sampler, start=args.start, jobs=args.jobs,
    )
    _estimate_out(est, args, SIM_CSV_FIELDS)


def cmd_limit_g(args) -> None:
    if args.table:
        lo, hi, points = float(args.table[0]), float(args.table[1]), int(args.table[2])
        if not 0 < lo < hi or points < 2:
            raise DomainError("--table needs 0 < CMIN < CMAX and at least two points")
        cs = list(np.geomspace(lo, hi, points))
    elif args.c:
        cs = args.c
    else:
        raise DomainError("give --c or --table")
    rows = []
    for c in cs:
        v = g(c)
        rows.append({"c": fmt_float(c), "g": fmt_float(v.value), "abs_err": fmt_float(v.estimated_abs_error)})
    _emit(rows, ("c", "g", "abs_err"), args)


def cmd_y_moments(args) -> None:
    rows = []
    for M in args.M:
        first = y_first_moment(M)
        second = y_second_moment(M)
        rows.append({
            "M": fmt_float(M),
            "first": fmt_float(first.value),
            "first_abs_err": fmt_float(first.estimated_abs_error),
            "second": fmt_float(second.value),
            "second_abs_err": fmt_float(second.estimated_abs_error),
            "second_over_asymptote": fmt_float(second.value / (4 * math.sqrt(2 / math.pi) * math.sqrt(M))),
        })
    _emit(rows, tuple(rows[0]), args)


def cmd_plan_run(args) -> None:
    replicates = experiments.PAPER_REPLICATES if args.paper_scale else args.replicates
    if args.preset:
        plans = [experiments.preset(
            args.preset, args.out_dir,
            replicates=replicates or experiments.DEFAULT_REPLICATES, seed=args.seed,
        )]
    else:
        overrides = {"replicates": replicates, "seed": args.seed}
        plans = experiments.load_plans(args.config, overrides=overrides)
    for plan in plans:
        log.info("running %s (%s, %d replicates)", plan.experiment_id, plan.kind, plan.replicates)
        table = experiments.run_plan(plan, jobs=args.jobs)
        failed = sum(1 for r in table.rows if r.get("error"))
        print(f"{plan.experiment_id}: {len(table.rows)} rows ({failed} failed) -> {plan.output_path}")
        if args.plot:
            fig = experiments.emit_plot(table, plan.output_path.with_suffix(".svg"))
            experiments.record_rendering(plan.output_path, fig, plan.kind)
            print(f"{plan.experiment_id}: figure -> {fig}")


def cmd_plan_plot(args) -> None:
    table = experiments.ResultTable.read_csv(args.table)
    out = args.out or args.table.with_suffix(".svg")
    fig = experiments.emit_plot(table, out, style=args.style)
    experiments.record_rendering(args.table, fig, table.kind)
    print(fig)


COMMANDS = {
    "exact": cmd_exact,
    "mc": cmd_mc,
    "conditioned": cmd_conditioned,
    "simulate": cmd_simulate,
    "limit-g": cmd_limit_g,
    "y-moments": cmd_y_moments,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "plan":
        handler = cmd_plan_run if args.plan_command == "run" else cmd_plan_plot
    else:
        handler = COMMANDS[args.command]
    try:
        handler(args)
    except InfeasibleError as exc:
        print(f"fixlab: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DomainError, SchemaError, ValueError) as exc:
        print(f"fixlab: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"fixlab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
