"""Command-line front end.

Usage::

    hadamard solve --config run.json --out results/
    hadamard bench --seed 42 --out results/ --plot
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import io
from .bench import BENCH_HEADER, CORPORA, bench_passed, run_bench
from .descent import DescentConfig, Status, solve_pointwise
from .maps import (
    SingularJacobian,
    MapSpec,
    check_jacobian,
    estimate_inverse_bound,
    linearization_modulus,
    make_map,
)
from .right_inverse import (
    CompactSample,
    NotACollision,
    Verdict,
    adjacent_continuity,
    certify_pair,
    lift_analysis,
    solve_right_inverse,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_JACOBIAN_CHECK = 7
STATUS_EXIT = {
    Status.CONVERGED: 0,
    Status.STALLED: 2,
    Status.MAX_ITERATIONS: 3,
    Status.SINGULAR_JACOBIAN: 4,
}
VERDICT_EXIT = {
    Verdict.CONSISTENT: 0,
    Verdict.DISTINCT: 5,
    Verdict.INCONCLUSIVE: 6,
}
FD_TOLERANCE = 1e-5
DEFAULT_T_VALUES = (1e-1, 1e-2, 1e-3, 1e-4)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    map: MapSpec | None = None
    descent: DescentConfig = field(default_factory=DescentConfig)
    output_format: str = "csv"
    seed: int = 42
    # solve
    y: list | None = None
    x0: list | None = None
    # certify / lift
    a: list | None = None
    b: list | None = None
    m: int = 50
    tol_lift: float = 1e-6
    # invert-set
    targets: list | None = None
    targets_file: str | None = None
    anchor_index: int | None = None
    anchor_point: list | None = None
    g_init: list | None = None
    # check-map
    box: list = field(default_factory=lambda: [-3.0, 3.0])
    samples: int = 20
    radius: float = 1.0
    t_values: list = field(default_factory=lambda: list(DEFAULT_T_VALUES))
    directions_per_point: int = 8
    # bench
    corpus: str = "default"

    @classmethod
    def from_dict(cls, obj: dict, base_dir: Path | None = None) -> "RunConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        obj = dict(obj)
        if obj.get("map") is not None:
            obj["map"] = MapSpec.from_dict(obj["map"])
        obj["descent"] = DescentConfig.from_dict(obj.get("descent"))
        if obj.get("targets_file") and base_dir is not None:
            obj["targets_file"] = str(base_dir / obj["targets_file"])
        cfg = cls(**obj)
        if cfg.output_format not in ("csv", "json"):
            raise ConfigError("output_format must be 'csv' or 'json'")
        if not isinstance(cfg.m, int) or cfg.m < 2:
            raise ConfigError("m must be an integer >= 2")
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON ({exc})") from None
        return cls.from_dict(obj, path.parent)

    def need(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"config is missing {', '.join(missing)}")

    def vector(self, name, n):
        v = np.array(getattr(self, name), dtype=float)
        if v.shape != (n,):
            raise ConfigError(f"{name} must have length {n}")
        return v


def _emit_trace(args, trace, stem="trace"):
    if args.format == "json":
        io.write_json(args.out / f"{stem}.json", io.trace_to_dict(trace))
    else:
        io.write_trace_csv(trace, args.out / f"{stem}.csv")
    if args.plot:
        from .plotting import plot_trace

        plot_trace(trace, args.out / f"{stem}.png")


def cmd_solve(cfg: RunConfig, args) -> int:
    cfg.need("map", "y")
    fmap = make_map(cfg.map)
    n = fmap.dimension
    y = cfg.vector("y", n)
    x0 = np.zeros(n) if cfg.x0 is None else cfg.vector("x0", n)
    report = solve_pointwise(fmap, y, x0, cfg.descent)
    doc = io.solve_report_to_dict(report, fmap.known_inverse_bound, cfg.descent.decrease_fraction)
    doc["map"] = cfg.map.to_dict()
    io.write_json(args.out / "solve_report.json", doc)
    _emit_trace(args, report.trace)
    print(f"{fmap.label}: {report.status.value} after {report.trace.iterations} iterations, "
          f"residual {report.residual_norm:.3e}")
    return STATUS_EXIT[report.status]


def _load_sample(cfg: RunConfig, fmap):
    g_init = None
    if cfg.targets_file:
        sample, g_init = io.sample_from_dict(json.loads(Path(cfg.targets_file).read_text()))
    elif cfg.targets is not None:
        sample = CompactSample(cfg.targets, cfg.anchor_index, cfg.anchor_point)
    else:
        raise ConfigError("invert-set needs 'targets' or 'targets_file'")
    if cfg.g_init is not None:
        g_init = np.array(cfg.g_init, dtype=float)
    sample.check_anchor(fmap)
    return sample, g_init


def cmd_invert_set(cfg: RunConfig, args) -> int:
    cfg.need("map")
    fmap = make_map(cfg.map)
    sample, g_init = _load_sample(cfg, fmap)
    state, trace = solve_right_inverse(fmap, sample, g_init, cfg.descent)
    doc = io.state_to_dict(state)
    doc.update(
        status=trace.status.value,
        iterations=trace.iterations,
        initial_merit=trace.initial_merit,
        path_length=trace.cumulative_path_length,
        continuity=adjacent_continuity(state, fmap.known_inverse_bound, cfg.descent.tol_residual),
        map=cfg.map.to_dict(),
    )
    io.write_json(args.out / "right_inverse.json", doc)
    _emit_trace(args, trace)
    print(f"{fmap.label}: {trace.status.value} on {len(sample)} targets after {trace.iterations} steps, "
          f"merit {state.merit:.3e}")
    return STATUS_EXIT[trace.status]


def _emit_lift(args, report, tol_lift):
    if args.format == "json":
        doc = report.summary()
        doc.update(t=report.t_grid, lift_error=report.lift_errors)
        io.write_json(args.out / "lift.json", doc)
    else:
        io.write_lift(report, args.out / "lift.csv", args.out / "lift_summary.json")
    if args.plot:
        from .plotting import plot_lift

        plot_lift(report, args.out / "lift.png", tol_lift)
    print(f"t_bar={report.t_bar:.6g} verdict={report.verdict.value}")
    return VERDICT_EXIT[report.verdict]


def cmd_certify(cfg: RunConfig, args) -> int:
    cfg.need("map", "a", "b")
    fmap = make_map(cfg.map)
    n = fmap.dimension
    try:
        report = certify_pair(fmap, cfg.vector("a", n), cfg.vector("b", n), cfg.m, cfg.descent, cfg.tol_lift)
    except NotACollision as exc:
        raise ConfigError(str(exc)) from None
    return _emit_lift(args, report, cfg.tol_lift)


def cmd_lift(cfg: RunConfig, args) -> int:
    cfg.need("map", "a")
    fmap = make_map(cfg.map)
    report = lift_analysis(fmap, cfg.vector("a", fmap.dimension), cfg.m, cfg.descent, cfg.tol_lift)
    return _emit_lift(args, report, cfg.tol_lift)


def cmd_check_map(cfg: RunConfig, args) -> int:
    cfg.need("map")
    fmap = make_map(cfg.map)
    lo, hi = cfg.box
    rng = np.random.default_rng(cfg.seed)
    pts = rng.uniform(lo, hi, (cfg.samples, fmap.dimension))
    fd_error = check_jacobian(fmap, pts)
    estimate = linearization_modulus(
        fmap, pts, cfg.radius, sorted(cfg.t_values, reverse=True), cfg.directions_per_point, cfg.seed
    )
    doc = {
        "map": cfg.map.to_dict(),
        "samples": cfg.samples,
        "box": [lo, hi],
        "fd_error": fd_error,
        "fd_ok": fd_error < FD_TOLERANCE,
        "alpha": estimate.to_dict(),
        "known_inverse_bound": fmap.known_inverse_bound,
    }
    try:
        doc["estimated_inverse_bound"] = estimate_inverse_bound(fmap, pts)
    except SingularJacobian as exc:
        doc["estimated_inverse_bound"] = None
        doc["singular_at"] = exc.point.tolist()
    io.write_json(args.out / "check_map.json", doc)
    if args.plot:
        from .plotting import plot_alpha

        plot_alpha(estimate, args.out / "alpha.png")
    print(f"{fmap.label}: fd_error={fd_error:.3e} M_est={doc['estimated_inverse_bound']}")
    return EXIT_OK if doc["fd_ok"] else EXIT_JACOBIAN_CHECK


def cmd_bench(cfg: RunConfig, args) -> int:
    name = args.corpus or cfg.corpus
    if name not in CORPORA:
        raise ConfigError(f"unknown corpus {name!r}; choose from {', '.join(CORPORA)}")
    rows = run_bench(name, cfg.seed, cfg.descent, jobs=args.jobs)
    if args.format == "json":
        io.write_json(args.out / "bench.json", [dict(zip(BENCH_HEADER, r.csv_row())) for r in rows])
    else:
        io.write_table_csv(args.out / "bench.csv", BENCH_HEADER, (r.csv_row() for r in rows))
    if args.plot:
        from .plotting import plot_bench

        plot_bench(rows, args.out / "bench.png")
    passed = bench_passed(rows)
    converged = sum(r.report.converged for r in rows)
    print(f"corpus {name}: {converged}/{len(rows)} converged, compliant bounds {'ok' if passed else 'VIOLATED'}")
    return EXIT_OK if passed else EXIT_CONFIG


COMMANDS = {
    "solve": cmd_solve,
    "invert-set": cmd_invert_set,
    "certify": cmd_certify,
    "lift": cmd_lift,
    "check-map": cmd_check_map,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, default=None, help="seed for sampled targets and directions")
    common.add_argument("--format", choices=("csv", "json"), default=None, help="trace/table output format")
    common.add_argument("--plot", action="store_true", help="also render PNG figures next to the tables")

    parser = argparse.ArgumentParser(prog="hadamard", description="Global inverse solvers for C^1 maps.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "bench":
            p.add_argument("--corpus", default=None, help=f"one of {', '.join(CORPORA)}")
            p.add_argument("--jobs", type=int, default=1, help="worker threads")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = RunConfig.load(args.config)
        elif args.command == "bench":
            cfg = RunConfig()
        else:
            raise ConfigError(f"{args.command} needs --config")
        if args.seed is not None:
            cfg.seed = args.seed
        args.format = args.format or cfg.output_format
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
