"""Command-line runner: ``noetherlab verify-ga | run-scenario | covariance``.

Exit status is 0 when every check meets its expected verdict, 1 when some
check does not, and 2 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .dynamics import ParticleTrajectory
from .lattice import LatticeField
from .noether import divergence, trajectory_values
from .report import ConservationReport
from .scenarios import SCENARIOS, ConfigError, ScenarioResult, load_config, run_covariance, run_scenario, thread_count
from .suites import ga_identity_suite, induced_map_suite, rotor_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def report_document(scenario: str, config: dict, reports: Sequence[ConservationReport], expected: dict[str, bool],
                    timing: dict[str, float]) -> dict:
    """Report document; everything except ``timing`` is deterministic for a given config."""
    verdicts = [r.passed if expected[r.name] else r.fails_clearly() for r in reports]
    return {
        "tool_version": __version__,
        "scenario": scenario,
        "config": config,
        "checks": [r.to_json() for r in reports],
        "expected": {r.name: "pass" if expected[r.name] else "fail" for r in reports},
        "overall_pass": all(verdicts),
        "timing": {k: round(v, 6) for k, v in timing.items()},
    }


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def deterministic_part(doc: dict) -> str:
    """Serialized document without the wall-clock field."""
    return dumps({k: v for k, v in doc.items() if k != "timing"})


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_csv(path: Path, header: Sequence[str], rows: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in np.atleast_2d(rows):
            w.writerow([_fmt(float(x)) for x in row])


def trajectory_series(traj: ParticleTrajectory, specs: dict) -> tuple[list[str], np.ndarray]:
    """Columns ``tau, q_i, p_i, conserved_<label>``."""
    alg = traj.system.algebra
    n = alg.n
    p = alg.coeffs_to_vectors(traj.p)
    header = ["tau"] + [f"q_{i + 1}" for i in range(n)] + [f"p_{i + 1}" for i in range(n)]
    cols = [traj.tau[:, None], traj.q, p]
    for label, spec in specs.items():
        header.append(f"conserved_{label}")
        cols.append(trajectory_values(traj, spec)[:, None])
    return header, np.hstack(cols)


def lattice_series(fld: LatticeField, j: np.ndarray, rings: int = 2) -> tuple[list[str], np.ndarray]:
    """Columns ``x1, x2, j_1, j_2, div_j`` on nodes ``rings`` inside the boundary."""
    split = fld.split
    inner = fld.grid.inner(rings)
    x = fld.grid.coords()[inner].reshape(-1, fld.D)
    axes = list(split.base_axes)
    jj = j[inner][..., axes].reshape(-1, fld.D)
    div = divergence(j, fld)[inner].reshape(-1, 1)
    header = [f"x{k + 1}" for k in range(fld.D)] + [f"j_{k + 1}" for k in range(fld.D)] + ["div_j"]
    return header, np.hstack([x, jj, div])


def emit_series(result: ScenarioResult, directory: str | Path) -> list[Path]:
    """Write the plot-ready series of a finished scenario run."""
    out_dir = Path(directory)
    sc = result.scenario
    written = []
    if "trajectory" in sc.data:
        header, rows = trajectory_series(sc.data["trajectory"], sc.data["drift_specs"])
        path = out_dir / "trajectory.csv"
        write_csv(path, header, rows)
        written.append(path)
    if "fields" in sc.data:
        fld = sc.data["fields"][0]
        for label, fn in sc.data["currents"].items():
            header, rows = lattice_series(fld, fn(fld))
            path = out_dir / f"current_{label}.csv"
            write_csv(path, header, rows)
            written.append(path)
    return written


def _print_reports(reports, expected, stream) -> None:
    for r in reports:
        exp = expected[r.name]
        ok = r.passed if exp else r.fails_clearly()
        tag = "ok " if ok else "BAD"
        want = "expect-pass" if exp else "expect-fail"
        print(f"{tag} [{want}] {r.line()}", file=stream)


def _write_report(doc: dict, path: str | None) -> None:
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(dumps(doc), encoding="utf-8")


def cmd_verify_ga(args) -> int:
    if not 1 <= args.dim <= 8:
        raise ConfigError("--dim must lie in 1..8")
    if args.samples < 1:
        raise ConfigError("--samples must be positive")
    rng = np.random.default_rng(args.seed)
    reports, timing = [], {}
    suites = [("ga", lambda: ga_identity_suite(args.dim, args.samples, rng))]
    # rotors and induced maps need at least one plane
    if args.dim >= 2:
        suites.append(("rotor", lambda: rotor_suite(args.dim, max(1, args.samples // 2), rng)))
        suites.append(("induced", lambda: induced_map_suite(args.dim, min(args.samples, 50), rng)))
    for label, fn in suites:
        t0 = time.perf_counter()
        part = fn()
        dt = time.perf_counter() - t0
        for r in part:
            timing[r.name] = dt / len(part)
        reports += part
    config = {"dim": args.dim, "samples": args.samples, "seed": args.seed}
    doc = report_document("verify-ga", config, reports, {r.name: True for r in reports}, timing)
    _print_reports(reports, {r.name: True for r in reports}, sys.stdout)
    _write_report(doc, args.report)
    return EXIT_OK if doc["overall_pass"] else EXIT_FAIL


def cmd_run_scenario(args) -> int:
    cfg = load_config(args.name, args.config, args.set or ())
    result = run_scenario(cfg, threads=thread_count())
    doc = report_document(cfg.name, cfg.echo(), result.reports, result.expected, result.timing)
    _print_reports(result.reports, result.expected, sys.stdout)
    _write_report(doc, args.report)
    if args.csv_dir:
        for path in emit_series(result, args.csv_dir):
            print(f"wrote {path}")
    print(f"overall: {'PASS' if doc['overall_pass'] else 'FAIL'}")
    return EXIT_OK if doc["overall_pass"] else EXIT_FAIL


def cmd_covariance(args) -> int:
    cfg = load_config(args.name, args.config, args.set or ())
    reports, timing = [], {}
    t0 = time.perf_counter()
    pairs = run_covariance(cfg, args.map)
    for rep, info in pairs:
        reports.append(rep)
        print(f"  {rep.name}: unprimed={info['unprimed']:.3e} primed={info['primed']:.3e}")
    elapsed = time.perf_counter() - t0
    timing = {r.name: elapsed / len(reports) for r in reports}
    config = dict(cfg.echo(), map=args.map)
    expected = {r.name: True for r in reports}
    doc = report_document(cfg.name, config, reports, expected, timing)
    _print_reports(reports, expected, sys.stdout)
    _write_report(doc, args.report)
    return EXIT_OK if doc["overall_pass"] else EXIT_FAIL


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="noetherlab", description="Symmetry and conservation-law checks for covariant Hamiltonians.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("verify-ga", help="randomized algebra identity suite")
    g.add_argument("--dim", type=int, default=4)
    g.add_argument("--samples", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--report", help="write the JSON report here")
    g.set_defaults(func=cmd_verify_ga)

    def common(sp):
        sp.add_argument("name", help=f"scenario: {', '.join(SCENARIOS)}")
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
        sp.add_argument("--report", help="write the JSON report here")

    r = sub.add_parser("run-scenario", help="run a built-in scenario")
    common(r)
    r.add_argument("--csv-dir", help="write CSV series into this directory")
    r.set_defaults(func=cmd_run_scenario)

    c = sub.add_parser("covariance", help="canonical residuals before and after diffeomorphisms")
    common(c)
    c.add_argument("--map", default="random", help="random[:K], translation:<v>, rotation:<B> or scaling:<s>")
    c.set_defaults(func=cmd_covariance)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    raise SystemExit(run())


__all__ = [
    "EXIT_CONFIG",
    "EXIT_FAIL",
    "EXIT_OK",
    "build_parser",
    "deterministic_part",
    "dumps",
    "emit_series",
    "lattice_series",
    "main",
    "report_document",
    "run",
    "trajectory_series",
    "write_csv",
]
