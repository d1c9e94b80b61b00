"""Command-line entry point: ``kleeminty run | report | rank | validate``.

Exit codes: 0 success, 1 validation failure, 2 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__, kernels
from .metrics import (IndicatorReport, RankingTable, aggregate_ecdf, compute_indicators,
                      ecdf_curve, make_targets, rank_algorithms, update_hits)
from .oracle import certify
from .problem import ConfigError, ProblemConfig, ProblemInstance
from .protocol import FAILED, TerminationRule, run_experiment
from .records import (CorruptRecordError, dumps_record, load_record, record_to_dict)
from .solvers import SOLVERS, make_solver

log = logging.getLogger("kleeminty")

DEFAULT_DIMS = (2, 3, 5, 10, 20, 40)
MIN_RUNS = 15
EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2
UNDEFINED = "--"
INDICATOR_COLUMNS = ("N", "f_opt", "f_best", "f_med", "nu_med", "abs_err", "FR",
                     "mean_param_dev", "meanFevals")
PROBLEM_KEYS = ("epsilon", "rotation_angle", "translation_scale", "box_upper_scale",
                "constraint_rotation", "allow_any_angle")
PROTOCOL_DEFAULTS = {"budget_factor": 20_000, "window_factor": 100,
                     "success_tolerance": 1e-8, "stagnation_unit": "generations"}


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}


@dataclass(frozen=True)
class SuiteConfig:
    dimensions: tuple[int, ...] = DEFAULT_DIMS
    runs: int = MIN_RUNS
    seed: int = 0
    algorithms: tuple[AlgorithmSpec, ...] = (AlgorithmSpec("rs"), AlgorithmSpec("de"), AlgorithmSpec("es"))
    problem: dict = field(default_factory=dict)
    protocol: dict = field(default_factory=dict)
    out: str = "results"
    workers: int = 1
    override_conventions: bool = False

    def validate(self) -> list[str]:
        """Raise :class:`ConfigError` on invalid settings; return warnings."""
        warnings = []
        if not self.dimensions:
            raise ConfigError("at least one dimension is required")
        if self.runs < 1:
            raise ConfigError("runs must be positive")
        if self.runs < MIN_RUNS:
            msg = f"runs={self.runs} is below the convention of at least {MIN_RUNS} runs"
            if not self.override_conventions:
                raise ConfigError(msg + "; pass --override-conventions to proceed")
            warnings.append(msg)
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        unknown = set(self.problem) - set(PROBLEM_KEYS)
        if unknown:
            raise ConfigError(f"unknown problem settings {sorted(unknown)}")
        unknown = set(self.protocol) - set(PROTOCOL_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown protocol settings {sorted(unknown)}")
        names = [a.name for a in self.algorithms]
        if not names:
            raise ConfigError("at least one algorithm is required")
        if len(set(names)) != len(names):
            raise ConfigError("each algorithm may appear only once")
        for a in self.algorithms:
            try:
                make_solver(a.name, a.params)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"algorithm {a.name!r}: {exc}") from None
        for n in self.dimensions:
            self.problem_config(n)
            self.rule(n)
        return warnings

    def problem_config(self, n: int) -> ProblemConfig:
        return ProblemConfig(int(n), **self.problem)

    def rule(self, n: int) -> TerminationRule:
        p = {**PROTOCOL_DEFAULTS, **self.protocol}
        try:
            return TerminationRule.for_dimension(int(n), int(p["budget_factor"]), int(p["window_factor"]),
                                                 float(p["success_tolerance"]), p["stagnation_unit"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return {
            "dimensions": [int(n) for n in self.dimensions],
            "runs": self.runs,
            "seed": self.seed,
            "algorithms": [a.to_dict() for a in self.algorithms],
            "problem": dict(self.problem),
            "protocol": {**PROTOCOL_DEFAULTS, **self.protocol},
            "override_conventions": self.override_conventions,
        }

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> "SuiteConfig":
        d = {**d, **overrides}
        algos = d.get("algorithms")
        if algos is not None:
            d["algorithms"] = tuple(a if isinstance(a, AlgorithmSpec) else
                                    AlgorithmSpec(a["name"], dict(a.get("params", {}))) for a in algos)
        if "dimensions" in d:
            d["dimensions"] = tuple(int(n) for n in d["dimensions"])
        known = set(cls.__dataclass_fields__)
        bad = set(d) - known
        if bad:
            raise ConfigError(f"unknown suite settings {sorted(bad)}")
        return cls(**d)


def _record_path(algo: str, n: int, i: int) -> str:
    return f"records/{algo}/N{n}/run_{i:02d}.json"


def _run_task(task: tuple) -> tuple[str, str, bool]:
    algo, params, problem, rule, seed, run_index, rel = task
    cfg = ProblemConfig.from_dict(problem)
    instance = ProblemInstance.from_config(cfg)
    solver = make_solver(algo, params)
    rule_obj = TerminationRule(**rule)
    rec = run_experiment(solver, instance, rule_obj, seed)
    doc = record_to_dict(rec, run_index=run_index, problem=problem,
                         algorithm_config=solver.config_dict(), rule=rule)
    return rel, dumps_record(doc), rec.termination_reason != FAILED


def suite_tasks(config: SuiteConfig) -> list[tuple]:
    tasks = []
    for a in config.algorithms:
        for n in config.dimensions:
            problem = config.problem_config(n).to_dict()
            rule = config.rule(n).to_dict()
            for i in range(config.runs):
                tasks.append((a.name, dict(a.params), problem, rule, config.seed + i, i,
                              _record_path(a.name, n, i)))
    return tasks


def run_suite(config: SuiteConfig, out: Path | None = None) -> Path:
    """Run every (algorithm, dimension, run) and persist the records.

    The manifest is written after all records, so its presence marks a
    complete suite. Returns the manifest path.
    """
    for w in config.validate():
        log.warning(w)
    out = Path(out if out is not None else config.out)
    manifest = out / "manifest.json"
    out.mkdir(parents=True, exist_ok=True)
    if manifest.exists():
        manifest.unlink()
    tasks = suite_tasks(config)
    written, failed = [], []

    def store(result):
        rel, text, ok = result
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        written.append(rel)
        if not ok:
            failed.append(rel)
            log.warning("run failed: %s", rel)

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for result in pool.map(_run_task, tasks, chunksize=1):
                store(result)
    else:
        for task in tasks:
            store(_run_task(task))
    doc = {
        "format": 1,
        "harness_version": __version__,
        "backend": kernels.BACKEND,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "suite": config.to_dict(),
        "records": sorted(written),
        "failed_runs": sorted(failed),
    }
    manifest.write_text(json.dumps(doc, indent=1) + "\n")
    return manifest


def _fmt(v) -> str:
    if v is None:
        return UNDEFINED
    if isinstance(v, float):
        return repr(v)
    return str(v)


def indicator_row(rep: IndicatorReport) -> list[str]:
    return [_fmt(getattr(rep, c)) for c in INDICATOR_COLUMNS]


@dataclass
class ReportResult:
    files: list[Path] = field(default_factory=list)
    problems: list[str] = field(default_factory=list)
    indicators: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    ranking: RankingTable | None = None


def _load_suite(directory: Path):
    manifest_path = directory / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text())
    except FileNotFoundError:
        raise OSError(f"{manifest_path} not found") from None
    except json.JSONDecodeError as exc:
        raise OSError(f"{manifest_path} is not valid JSON: {exc}") from None
    suite = SuiteConfig.from_dict(manifest["suite"], override_conventions=True)
    return manifest, suite


def _collect(directory: Path, manifest: dict, suite: SuiteConfig, result: ReportResult):
    grouped: dict[str, dict[int, list]] = {}
    for a in suite.algorithms:
        for n in suite.dimensions:
            grouped.setdefault(a.name, {})[n] = []
    for rel in manifest["records"]:
        try:
            _, rec = load_record(directory / rel)
        except (OSError, CorruptRecordError) as exc:
            result.problems.append(f"{rel}: {exc}")
            continue
        if rec.algorithm not in grouped or rec.dimension not in grouped[rec.algorithm]:
            result.problems.append(f"{rel}: not part of the suite configuration")
            continue
        grouped[rec.algorithm][rec.dimension].append(rec)
    return grouped


def _analyse(directory: Path, result: ReportResult):
    manifest, suite = _load_suite(directory)
    grouped = _collect(directory, manifest, suite, result)
    for algo, by_dim in grouped.items():
        hits_by_dim = {}
        for n, recs in sorted(by_dim.items()):
            if not recs:
                result.problems.append(f"{algo} N={n}: no readable records")
                continue
            recs.sort(key=lambda r: r.seed)
            inst = ProblemInstance.from_config(suite.problem_config(n))
            targets = make_targets(inst.optimum_value)
            hits = [update_hits(r.trajectory, targets) for r in recs]
            hits_by_dim[n] = hits
            result.indicators[(algo, n)] = compute_indicators(recs, inst, algorithm=algo)
            result.curves[(algo, n)] = ecdf_curve(hits, suite.rule(n).budget)
        if hits_by_dim:
            factor = {**PROTOCOL_DEFAULTS, **suite.protocol}["budget_factor"]
            result.curves[(algo, "all")] = aggregate_ecdf(hits_by_dim, factor)
    return suite


def _ranking_entries(result: ReportResult, suite: SuiteConfig):
    entries = {}
    for (algo, n), rep in result.indicators.items():
        entries.setdefault(algo, {})[n] = (rep, result.curves[(algo, n)])
    return entries


def write_ranking(table: RankingTable, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "algorithm", "quality_rank", "deviation_rank", "runtime_rank",
                    "consensus", "ecdf_area", "meanFevals"])
        for r in table.rows:
            w.writerow([r.N, r.algorithm, _fmt(r.quality_rank), _fmt(r.deviation_rank),
                        _fmt(r.runtime_rank), _fmt(r.consensus), _fmt(r.ecdf_area), _fmt(r.meanFevals)])
        for pos, (algo, score) in enumerate(table.overall, start=1):
            w.writerow(["all", algo, "", "", "", _fmt(score), "", pos])
    return path


def emit_reports(directory: Path, out: Path | None = None) -> ReportResult:
    """Indicator CSVs, ECDF step data and ranking table for a suite directory."""
    directory = Path(directory)
    out = Path(out) if out is not None else directory / "reports"
    result = ReportResult()
    suite = _analyse(directory, result)
    (out / "ecdf").mkdir(parents=True, exist_ok=True)
    for a in suite.algorithms:
        path = out / f"indicators_{a.name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(INDICATOR_COLUMNS)
            for n in suite.dimensions:
                if (a.name, n) in result.indicators:
                    w.writerow(indicator_row(result.indicators[(a.name, n)]))
        result.files.append(path)
    for (algo, n), curve in sorted(result.curves.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        tag = "all" if n == "all" else f"N{n}"
        path = out / "ecdf" / f"{algo}_{tag}.dat"
        axis = "evaluations_per_dimension" if n == "all" else "evaluations"
        lines = [f"# algorithm={algo} N={n if n != 'all' else 'all'} scope={curve.scope} "
                 f"runs_x_targets={curve.total}",
                 f"# {axis} fraction"]
        lines += [f"{int(e) if float(e).is_integer() else repr(e)} {_fmt(frac)}" for e, frac in curve.steps()]
        path.write_text("\n".join(lines) + "\n")
        result.files.append(path)
    entries = _ranking_entries(result, suite)
    if len(entries) >= 2:
        try:
            result.ranking = rank_algorithms(entries)
            result.files.append(write_ranking(result.ranking, out / "ranking.csv"))
        except ValueError as exc:
            result.problems.append(f"ranking skipped: {exc}")
    return result


# argument parsing

_ALGO_SPLIT = re.compile(r",(?=\s*[A-Za-z_]\w*\s*:)")


def parse_algo(text: str) -> AlgorithmSpec:
    """``name`` or ``name=key:value,key:value``; values are read as JSON when possible."""
    name, _, rest = text.partition("=")
    name = name.strip()
    if name not in SOLVERS:
        raise argparse.ArgumentTypeError(f"unknown algorithm {name!r}; choose from {sorted(SOLVERS)}")
    params = {}
    if rest.strip():
        for item in _ALGO_SPLIT.split(rest):
            key, sep, raw = item.partition(":")
            if not sep:
                raise argparse.ArgumentTypeError(f"expected key:value in {item!r}")
            raw = raw.strip()
            try:
                val = json.loads(raw)
            except json.JSONDecodeError:
                val = raw
            params[key.strip()] = tuple(val) if isinstance(val, list) else val
    return AlgorithmSpec(name, params)


def _dims(values: Sequence[str]) -> tuple[int, ...]:
    out = []
    for v in values:
        out += [int(p) for p in str(v).split(",") if p.strip()]
    return tuple(out)


def _add_problem_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("problem")
    g.add_argument("--epsilon", type=float)
    g.add_argument("--angle", type=float, help="rotation angle in degrees (default 350)")
    g.add_argument("--allow-any-angle", action="store_true", default=None,
                   help="accept angles outside [270, 360] degrees")
    g.add_argument("--translation-scale", type=float)
    g.add_argument("--box-scale", type=float, dest="box_upper_scale")
    g.add_argument("--constraint-rotation", choices=("transpose", "direct"))


def _problem_overrides(a: argparse.Namespace) -> dict:
    d = {}
    if a.epsilon is not None:
        d["epsilon"] = a.epsilon
    if a.angle is not None:
        d["rotation_angle"] = math.radians(a.angle)
    if a.allow_any_angle:
        d["allow_any_angle"] = True
    for key in ("translation_scale", "box_upper_scale", "constraint_rotation"):
        if getattr(a, key) is not None:
            d[key] = getattr(a, key)
    return d


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kleeminty", description="Rotated Klee-Minty benchmark harness")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark suite and write run records")
    run.add_argument("--config", type=Path, help="suite configuration JSON")
    run.add_argument("--dims", nargs="+")
    run.add_argument("--runs", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--algo", action="append", type=parse_algo,
                     help="name or name=key:value,... (repeatable)")
    run.add_argument("--out", type=Path)
    run.add_argument("--workers", type=int)
    run.add_argument("--budget-factor", type=int)
    run.add_argument("--window-factor", type=int)
    run.add_argument("--stagnation-unit", choices=("generations", "evaluations"))
    run.add_argument("--override-conventions", action="store_true", default=None)
    _add_problem_flags(run)

    rep = sub.add_parser("report", help="indicator tables, ECDF data and ranking")
    rep.add_argument("directory", type=Path)
    rep.add_argument("--out", type=Path)

    rk = sub.add_parser("rank", help="print the ranking table")
    rk.add_argument("directory", type=Path)
    rk.add_argument("--out", type=Path)

    val = sub.add_parser("validate", help="certify problem instances with the oracle")
    val.add_argument("--config", type=Path)
    val.add_argument("--dims", nargs="+")
    _add_problem_flags(val)
    return ap


def _suite_from_args(a: argparse.Namespace) -> SuiteConfig:
    base = {}
    if a.config is not None:
        base = json.loads(a.config.read_text())
    cfg = SuiteConfig.from_dict(base)
    changes = {}
    if a.dims:
        changes["dimensions"] = _dims(a.dims)
    for key in ("runs", "seed", "workers", "override_conventions"):
        if getattr(a, key, None) is not None:
            changes[key] = getattr(a, key)
    if getattr(a, "out", None) is not None:
        changes["out"] = str(a.out)
    if getattr(a, "algo", None):
        changes["algorithms"] = tuple(a.algo)
    problem = {**cfg.problem, **_problem_overrides(a)}
    protocol = dict(cfg.protocol)
    for key in ("budget_factor", "window_factor", "stagnation_unit"):
        if getattr(a, key, None) is not None:
            protocol[key] = getattr(a, key)
    return SuiteConfig.from_dict({**cfg.__dict__, **changes, "problem": problem, "protocol": protocol})


def _cmd_run(a) -> int:
    cfg = _suite_from_args(a)
    manifest = run_suite(cfg)
    m = json.loads(manifest.read_text())
    print(f"wrote {len(m['records'])} records and {manifest}")
    if m["failed_runs"]:
        print(f"{len(m['failed_runs'])} runs failed", file=sys.stderr)
    return EXIT_OK


def _cmd_report(a) -> int:
    res = emit_reports(a.directory, a.out)
    for p in res.files:
        print(p)
    for msg in res.problems:
        print(f"problem: {msg}", file=sys.stderr)
    return EXIT_INVALID if res.problems else EXIT_OK


def _cmd_rank(a) -> int:
    res = ReportResult()
    suite = _analyse(a.directory, res)
    for msg in res.problems:
        print(f"problem: {msg}", file=sys.stderr)
    table = rank_algorithms(_ranking_entries(res, suite))
    print(f"{'N':>4} {'algorithm':<10} {'quality':>8} {'deviation':>9} {'runtime':>8} {'consensus':>9}")
    for r in table.rows:
        print(f"{r.N:>4} {r.algorithm:<10} {r.quality_rank:>8.2f} {r.deviation_rank:>9.2f} "
              f"{r.runtime_rank:>8.2f} {r.consensus:>9.3f}")
    print("overall:", ", ".join(f"{i}. {n} ({s:.3f})" for i, (n, s) in enumerate(table.overall, 1)))
    out = a.out if a.out is not None else a.directory / "reports" / "ranking.csv"
    write_ranking(table, out)
    return EXIT_INVALID if res.problems else EXIT_OK


def _cmd_validate(a) -> int:
    base = json.loads(a.config.read_text()) if a.config is not None else {}
    cfg = SuiteConfig.from_dict(base)
    dims = _dims(a.dims) if a.dims else cfg.dimensions
    problem = {**cfg.problem, **_problem_overrides(a)}
    ok = True
    for n in dims:
        rep = certify(ProblemConfig(int(n), **problem))
        print("\n".join(rep.lines()))
        ok &= rep.passed
    print("all checks passed" if ok else "certification FAILED")
    return EXIT_OK if ok else EXIT_INVALID


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handlers = {"run": _cmd_run, "report": _cmd_report, "rank": _cmd_rank, "validate": _cmd_validate}
    try:
        return handlers[a.command](a)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
