"""Declarative figure-reproduction sweeps.

A plan names a grid of system sizes, one or more rules for choosing ``delta``
at each size, an estimator and a seed. Running it writes a CSV (one row per
grid point and estimator) and a JSON manifest next to it. The CSV depends only
on the plan, so reruns are byte-identical; wall time and the timestamp live
in the manifest.
"""
from __future__ import annotations

import configparser
import csv
import json
import logging
import math
import re
import time
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

import fixlab
from fixlab.environment import ENUMERATION_CAP
from fixlab.errors import DomainError, InfeasibleError, SchemaError
from fixlab.lattice import estimate_fixation
from fixlab.limits import g
from fixlab.rng import check_seed, default_seed
from fixlab.solver import annealed_exact, annealed_mc, conditioned_average
from fixlab.stats import FixationEstimate, fmt_float

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
KINDS = ("fig-line", "fig-infty", "fig-cycle", "sweep", "single")
PLAN_MODES = ("auto", "exact", "mc", "conditioned", "sim")
DEFAULT_REPLICATES = 10**5
PAPER_REPLICATES = 10**6

COMMON_COLUMNS = ("n", "delta", "mode", "mean", "std_error", "replicates", "seed", "topology", "c")
SCALED_COLUMNS = COMMON_COLUMNS + ("n_mean", "n_std_error", "g_limit", "error")
INFTY_COLUMNS = COMMON_COLUMNS + (
    "sqrt_pi_n_mean",
    "sqrt_pi_n_std_error",
    "eq_second",
    "prediction_ratio",
    "sim_over_curve",
    "error",
)
RESULT_COLUMNS = {
    "fig-line": SCALED_COLUMNS,
    "fig-cycle": SCALED_COLUMNS,
    "sweep": SCALED_COLUMNS,
    "single": SCALED_COLUMNS,
    "fig-infty": INFTY_COLUMNS,
}


class DeltaRule(NamedTuple):
    """``fixed(d)``: delta = d at every size; ``scaled(c)``: delta = c / sqrt(N).

    ``grid`` restricts the rule to its own sizes (written ``scaled(3)[10:150:10]``);
    by default the rule runs on the plan's whole grid.
    """

    kind: str
    value: float
    grid: Optional[tuple[int, ...]] = None

    def delta(self, n: int) -> float:
        return self.value if self.kind == "fixed" else self.value / math.sqrt(n)

    def c(self, n: int) -> float:
        return self.value * math.sqrt(n) if self.kind == "fixed" else self.value

    def __str__(self):
        base = f"{self.kind}({self.value:g})"
        return base if self.grid is None else base + "[" + ",".join(map(str, self.grid)) + "]"

    def sizes(self, default: tuple[int, ...]) -> tuple[int, ...]:
        return default if self.grid is None else self.grid

    @classmethod
    def parse(cls, text: str) -> "DeltaRule":
        m = re.fullmatch(_RULE, text.strip())
        if m is None:
            raise DomainError(f"bad delta rule {text!r}; expected fixed(d) or scaled(c)")
        value = float(m.group(2))
        if value < 0:
            raise DomainError("delta rules take nonnegative values")
        return cls(m.group(1), value, parse_grid(m.group(3)) if m.group(3) else None)


_RULE = r"(fixed|scaled)\(\s*([^)]+?)\s*\)(?:\[([^\]]*)\])?"


def parse_grid(text: str) -> tuple[int, ...]:
    """``"10:250:10"`` (inclusive), ``"25, 50, 100"`` or a mix of both."""
    out: list[int] = []
    for part in str(text).replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = [int(b) for b in part.split(":")]
            start, stop, step = (bits + [1])[:3] if len(bits) == 2 else bits
            out.extend(range(start, stop + 1, step))
        else:
            out.append(int(part))
    if not out or any(n < 1 for n in out):
        raise DomainError(f"bad size grid {text!r}")
    return tuple(out)


@dataclass(frozen=True)
class ExperimentPlan:
    experiment_id: str
    kind: str
    n_grid: tuple[int, ...]
    delta_rules: tuple[DeltaRule, ...]
    replicates: int = DEFAULT_REPLICATES
    seed: int = field(default_factory=default_seed)
    output_path: Path = Path("results.csv")
    topology: str = "line"
    mode: str = "auto"
    sampler: str = "effective"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown plan kind {self.kind!r}; choose from {KINDS}")
        if self.mode not in PLAN_MODES:
            raise DomainError(f"unknown mode {self.mode!r}; choose from {PLAN_MODES}")
        if self.topology not in ("line", "circle"):
            raise DomainError(f"unknown topology {self.topology!r}")
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "delta_rules", tuple(self.delta_rules))
        object.__setattr__(self, "output_path", Path(self.output_path))
        object.__setattr__(self, "seed", check_seed(self.seed))
        if not self.n_grid or not self.delta_rules:
            raise DomainError("a plan needs at least one size and one delta rule")
        if int(self.replicates) < 2:
            raise DomainError("a plan needs at least two replicates")
        rules = self.delta_rules
        if self.kind == "fig-line" and not all(r.kind == "scaled" and r.value in (2, 3) for r in rules):
            raise DomainError("fig-line plans use scaled(2) and/or scaled(3)")
        if self.kind == "fig-infty" and [(r.kind, r.value) for r in rules] != [("fixed", 0.2)]:
            raise DomainError("fig-infty plans use fixed(0.2)")
        if self.kind == "fig-cycle" and [(r.kind, r.value) for r in rules] != [("scaled", 2.0)]:
            raise DomainError("fig-cycle plans use scaled(2)")
        if self.kind == "single" and (len(self.n_grid) != 1 or len(rules) != 1 or rules[0].grid):
            raise DomainError("single plans have exactly one size and one delta rule")

    @property
    def manifest_path(self) -> Path:
        return self.output_path.with_suffix(".manifest.json")

    def describe(self) -> dict:
        d = asdict(self)
        d["delta_rules"] = [str(r) for r in self.delta_rules]
        d["n_grid"] = list(self.n_grid)
        d["output_path"] = str(self.output_path)
        return d


def preset(kind: str, out_dir: Path | str = ".", replicates: int = DEFAULT_REPLICATES, seed: Optional[int] = None) -> ExperimentPlan:
    """The plans behind the three published figures."""
    seed = default_seed() if seed is None else seed
    out = Path(out_dir)
    if kind == "fig-line":
        return ExperimentPlan(
            "fig-line", "fig-line", parse_grid("10:250:10"),
            (DeltaRule("scaled", 2.0), DeltaRule("scaled", 3.0, parse_grid("10:150:10"))),
            replicates, seed, out / "fig-line.csv",
        )
    if kind == "fig-infty":
        return ExperimentPlan(
            "fig-infty", "fig-infty", (25, 50, 100, 200, 400, 800, 1600, 3200, 6400),
            (DeltaRule("fixed", 0.2),), replicates, seed, out / "fig-infty.csv",
        )
    if kind == "fig-cycle":
        return ExperimentPlan(
            "fig-cycle", "fig-cycle", parse_grid("10:250:10"),
            (DeltaRule("scaled", 2.0),), replicates, seed, out / "fig-cycle.csv",
        )
    raise DomainError(f"no preset for {kind!r}")


def load_plans(
    path: Path | str,
    paper_scale: bool = False,
    overrides: Optional[dict] = None,
) -> list[ExperimentPlan]:
    """Read ``key = value`` sections, one plan per section.

    Recognised keys: kind, n_grid, delta (rules like ``scaled(2), scaled(3)``),
    c (shorthand for scaled rules), replicates, seed, output, topology, mode,
    sampler. Unset keys of figure kinds fall back to the presets.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not parser.read(path):
        raise OSError(f"cannot read plan config {path}")
    base = Path(path).parent
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    plans = []
    for name in parser.sections():
        sec = parser[name]
        kind = sec.get("kind", name)
        fields: dict = {}
        if kind in ("fig-line", "fig-infty", "fig-cycle"):
            fields = {k: v for k, v in asdict(preset(kind)).items()}
        fields["experiment_id"] = name
        fields["kind"] = kind
        if "n_grid" in sec:
            fields["n_grid"] = parse_grid(sec["n_grid"])
        if "delta" in sec:
            fields["delta_rules"] = tuple(_parse_rules(sec["delta"]))
        elif "c" in sec:
            fields["delta_rules"] = tuple(DeltaRule("scaled", float(c)) for c in sec["c"].split(","))
        for key in ("topology", "mode", "sampler"):
            if key in sec:
                fields[key] = sec[key].strip()
        if "replicates" in sec:
            fields["replicates"] = int(float(sec["replicates"]))
        if paper_scale:
            fields["replicates"] = PAPER_REPLICATES
        fields["seed"] = int(sec["seed"], 0) if "seed" in sec else default_seed()
        fields["output_path"] = base / sec.get("output", f"{name}.csv")
        fields.update(overrides)
        missing = {"n_grid", "delta_rules"} - fields.keys()
        if missing:
            raise DomainError(f"plan [{name}] is missing {sorted(missing)}")
        plans.append(ExperimentPlan(**fields))
    return plans


def _parse_rules(text: str) -> list[DeltaRule]:
    return [DeltaRule.parse(m.group(0)) for m in re.finditer(_RULE, text)]


@dataclass
class ResultTable:
    kind: str
    rows: list[dict[str, str]]

    @property
    def columns(self) -> tuple[str, ...]:
        return RESULT_COLUMNS[self.kind]

    def write_csv(self, path: Path | str) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=self.columns, lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: row.get(k, "") for k in self.columns})

    @classmethod
    def read_csv(cls, path: Path | str, kind: Optional[str] = None) -> "ResultTable":
        path = Path(path)
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = tuple(reader.fieldnames or ())
            rows = list(reader)
        if kind is None:
            manifest = path.with_suffix(".manifest.json")
            if manifest.exists():
                kind = json.loads(manifest.read_text())["kind"]
            else:
                kind = next((k for k, cols in RESULT_COLUMNS.items() if cols == header), None)
        if kind not in RESULT_COLUMNS:
            raise SchemaError(f"cannot tell which plan kind produced {path}")
        check_columns(kind, header)
        return cls(kind, rows)


def check_columns(kind: str, header: Iterable[str]) -> None:
    expected = RESULT_COLUMNS[kind]
    header = tuple(header)
    if header != expected:
        raise SchemaError(
            f"{kind} tables need columns {', '.join(expected)}; got {', '.join(header) or 'none'}"
        )


def _estimate_row(est: FixationEstimate, c: float, kind: str, topology: str) -> dict[str, str]:
    row = est.csv_row()
    row["topology"] = topology
    row["c"] = fmt_float(c)
    n = est.n_sites
    if kind == "fig-infty":
        k = math.sqrt(math.pi * n)
        gv = g(c).value
        curve = gv * math.sqrt(math.pi / n)
        row.update(
            sqrt_pi_n_mean=fmt_float(k * est.mean),
            sqrt_pi_n_std_error=fmt_float(k * est.std_error),
            eq_second=fmt_float(curve),
            prediction_ratio=fmt_float(curve / est.delta) if est.delta > 0 else "",
            sim_over_curve=fmt_float(est.mean / (gv / n)),
        )
    else:
        row.update(
            n_mean=fmt_float(n * est.mean),
            n_std_error=fmt_float(n * est.std_error),
            g_limit=fmt_float(g(c).value),
        )
    row["error"] = ""
    return row


def _failed_row(n: int, delta: Optional[float], c: Optional[float], mode: str, topology: str, exc: Exception) -> dict:
    return {
        "n": str(n),
        "delta": "" if delta is None else fmt_float(delta),
        "c": "" if c is None else fmt_float(c),
        "mode": mode,
        "topology": topology,
        "error": f"{type(exc).__name__}: {exc}",
    }


def _tasks(plan: ExperimentPlan):
    """(n, rule, estimator, topology) in output order."""
    for rule in plan.delta_rules:
        for n in rule.sizes(plan.n_grid):
            if plan.kind in ("fig-line", "fig-infty"):
                yield n, rule, "mc", "line"
            elif plan.kind == "fig-cycle":
                yield n, rule, "sim", "circle"
                yield n, rule, "mc", "line"
                yield n, rule, "sim", "line"
            elif plan.topology == "circle":
                yield n, rule, "sim", "circle"
            else:
                mode = plan.mode
                if mode == "auto":
                    mode = "exact" if n <= ENUMERATION_CAP else "mc"
                yield n, rule, mode, "line"


def _run_point(plan: ExperimentPlan, n: int, rule: DeltaRule, mode: str, topology: str, jobs: int) -> FixationEstimate:
    delta = rule.delta(n)
    tag = f"{plan.experiment_id}/{rule}/{mode}-{topology}/n={n}"
    if mode == "exact":
        return annealed_exact(n, delta)
    if mode == "conditioned":
        return conditioned_average(n, delta)
    if mode == "mc":
        return annealed_mc(n, delta, plan.replicates, plan.seed, jobs=jobs, tag=tag)
    return estimate_fixation(
        topology, n, delta, plan.replicates, plan.seed, sampler=plan.sampler, jobs=jobs, tag=tag
    )


def run_plan(plan: ExperimentPlan, jobs: int = 1, write: bool = True) -> ResultTable:
    """Execute every grid point in order; failed points become rows with an error message."""
    started = time.perf_counter()
    rows = []
    failed = 0
    for n, rule, mode, topology in _tasks(plan):
        label = {"sim": f"sim-{topology}"}.get(mode, mode)
        try:
            est = _run_point(plan, n, rule, mode, topology, jobs)
            rows.append(_estimate_row(est, rule.c(n), plan.kind, topology))
        except (DomainError, InfeasibleError, ValueError) as exc:
            failed += 1
            log.warning("%s: point n=%d %s failed: %s", plan.experiment_id, n, rule, exc)
            delta = rule.delta(n)
            row = dict.fromkeys(RESULT_COLUMNS[plan.kind], "")
            row.update(_failed_row(n, delta, rule.c(n), label, topology, exc))
            rows.append(row)
    table = ResultTable(plan.kind, rows)
    if write:
        table.write_csv(plan.output_path)
        manifest = {
            "experiment_id": plan.experiment_id,
            "kind": plan.kind,
            "schema_version": SCHEMA_VERSION,
            "columns": list(table.columns),
            "plan": plan.describe(),
            "seed": plan.seed,
            "jobs": jobs,
            "code_version": fixlab.__version__,
            "rows": len(rows),
            "failed_points": failed,
            "wall_time_s": round(time.perf_counter() - started, 3),
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        plan.manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return table


# plotting -------------------------------------------------------------------

def _float(row: dict, key: str) -> float:
    v = row.get(key, "")
    return float(v) if v not in ("", None) else math.nan


def emit_plot(table: ResultTable, path: Path | str, style: str = "paper") -> Path:
    """Render a result table as a vector figure (format from the file suffix; SVG by default).

    Points carry +-2 standard-error bars. ``style="plain"`` drops the
    limit/prediction overlays.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if table.kind not in RESULT_COLUMNS:
        raise SchemaError(f"unknown table kind {table.kind!r}")
    for row in table.rows:
        if set(row) != set(table.columns):
            raise SchemaError(
                f"{table.kind} tables need columns {', '.join(table.columns)}; got {', '.join(row)}"
            )
    good = [r for r in table.rows if not r.get("error")]
    if not good:
        raise SchemaError("nothing to plot: the table has no successful rows")
    path = Path(path)
    if not path.suffix:
        path = path.with_suffix(".svg")
    fmt = path.suffix.lstrip(".")
    if fmt not in ("svg", "pdf", "eps", "ps"):
        raise SchemaError(f"{path.name}: only vector formats (svg, pdf, eps, ps) are written")

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    overlays = style != "plain"
    if table.kind == "fig-infty":
        ns = [int(r["n"]) for r in good]
        ys = [_float(r, "sqrt_pi_n_mean") for r in good]
        es = [2 * _float(r, "sqrt_pi_n_std_error") for r in good]
        ax.errorbar(ns, ys, yerr=es, fmt="o", color="red", label=r"simulation $\sqrt{\pi N}\langle P_N\rangle$")
        if overlays:
            delta = _float(good[0], "delta")
            lo, hi = min(ns), max(ns)
            grid = sorted({int(round(lo * (hi / lo) ** (i / 200))) for i in range(201)})
            ax.plot(grid, [g(delta * math.sqrt(n)).value * math.sqrt(math.pi / n) for n in grid],
                    color="blue", label=r"$g(\delta\sqrt{N})\sqrt{\pi/N}$")
            ax.axhline(delta, color="gray", ls=":", lw=1)
        ax.set_xscale("log")
        ax.set_ylabel(r"$\sqrt{\pi N}\,\langle P_N\rangle$")
    else:
        series: dict[tuple[str, str], list[dict]] = {}
        for r in good:
            series.setdefault((r["mode"], r["c"]), []).append(r)
        colors = {"sim-circle": "blue", "mc": "red", "exact": "red", "sim-line": "orange", "conditioned": "green"}
        for (mode, c), rows in series.items():
            ns = [int(r["n"]) for r in rows]
            ys = [_float(r, "n_mean") for r in rows]
            es = [2 * _float(r, "n_std_error") for r in rows]
            label = f"{mode}, c={float(c):g}" if c else mode
            color = colors.get(mode) if table.kind == "fig-cycle" else None
            ax.errorbar(ns, ys, yerr=es, fmt="o", ms=4, capsize=2, label=label, color=color)
            if overlays and c and mode != "sim-line":
                ax.axhline(_float(rows[0], "g_limit"), ls="--", lw=1, color=ax.lines[-1].get_color())
        ax.axhline(1.0, color="gray", ls=":", lw=1)
        ax.set_ylabel(r"$N\,\langle P_N\rangle$")
    ax.set_xlabel("$N$")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format=fmt)
    plt.close(fig)
    return path


def record_rendering(table_path: Path | str, figure: Path | str, kind: str) -> None:
    """Note in the run manifest which quantity the figure plots."""
    manifest = Path(table_path).with_suffix(".manifest.json")
    if not manifest.exists():
        return
    data = json.loads(manifest.read_text())
    axis = "sqrt(pi N) <P_N> against g(delta sqrt N) sqrt(pi/N)" if kind == "fig-infty" else "N <P_N>"
    data.setdefault("renderings", []).append({"figure": str(figure), "y_axis": axis})
    manifest.write_text(json.dumps(data, indent=2) + "\n")
