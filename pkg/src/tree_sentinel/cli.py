"""Command-line interface.

Subcommands:
  verify   one satisfiability check; prints sat/unsat/unknown and any
           counterexample (exit 0 = property holds, 1 = violated)
  extract  full detection loop; writes the violation-range file and a
           JSON report, prints a human-readable table
  filter   `filter check` tests a point against a ranges file (deny/allow)
  oracle   brute-force enumeration of violating grid points
  bench    synthetic-model sweeps over n_est/max_d/s, emitting CSV

Option precedence is flags > environment > config file > defaults. The
config file is JSON and may carry solver_cmd, r_a, r_b, r_c,
per_call_timeout, total_budget and seed.

Exit codes: 0 success, 1 property violated (verify), 2 usage error,
3 solver or environment error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

from .detector import (
    DetectionReport,
    Parameters,
    detect_violation_ranges,
    filter_check,
    format_report_table,
    report_to_dict,
)
from .geometry import Box, box_from_json, box_to_json, closed_box
from .model import Ensemble, ModelFormatError, load_model
from .oracle import GridSpec, OracleError, brute_force_violations, DEFAULT_GRID_CAP
from .properties import PropertyBindError, PropertySyntaxError, parse_property
from .rational import format_fraction, to_fraction
from .smt import (
    SOLVER_ENV_VAR,
    ConstraintSet,
    Sat,
    SolverConfig,
    SolverError,
    SolverNotFoundError,
    Unknown,
    Unsat,
    check_sat,
)
from .synth import random_ensemble

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_USAGE = 2
EXIT_ENVIRONMENT = 3


class UsageError(Exception):
    pass


def _read_file(path: str, what: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {what} file {path!r}: {exc}") from exc


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(_read_file(path, "config").decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config file {path!r} must hold a JSON object")
    return data


def _load_model_file(path: str) -> tuple[Ensemble, bytes]:
    raw = _read_file(path, "model")
    try:
        return load_model(raw), raw
    except ModelFormatError as exc:
        raise UsageError(f"model file {path!r}: {exc}") from exc


def _parse_property_text(text: str):
    try:
        return parse_property(text)
    except PropertySyntaxError as exc:
        raise UsageError(f"property: {exc}") from exc


def _domain_from_file(path: str, m: Ensemble) -> Box:
    try:
        data = json.loads(_read_file(path, "domain").decode("utf-8"))
        bounds = data["bounds"]
        pairs = [(to_fraction(b["min"]), to_fraction(b["max"])) for b in bounds]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"domain file {path!r}: {exc}") from exc
    if len(pairs) != m.n_features:
        raise UsageError(
            f"domain file {path!r} has {len(pairs)} bounds but the model has {m.n_features} features"
        )
    return closed_box(pairs)


def _domain_from_csv(path: str, m: Ensemble) -> Box:
    """Per-feature [min, max] over a CSV of training data (closed box)."""
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None:
                raise UsageError(f"csv file {path!r} is empty")
            names = [f.name for f in m.features]
            if all(name in header for name in names):
                columns = [header.index(name) for name in names]
            elif len(header) >= m.n_features:
                columns = list(range(m.n_features))
            else:
                raise UsageError(
                    f"csv file {path!r} has {len(header)} columns but the model has {m.n_features} features"
                )
            mins: list[Fraction | None] = [None] * m.n_features
            maxs: list[Fraction | None] = [None] * m.n_features
            for row in reader:
                if not row:
                    continue
                for k, col in enumerate(columns):
                    value = to_fraction(row[col])
                    if mins[k] is None or value < mins[k]:
                        mins[k] = value
                    if maxs[k] is None or value > maxs[k]:
                        maxs[k] = value
    except (OSError, ValueError, IndexError) as exc:
        raise UsageError(f"csv file {path!r}: {exc}") from exc
    if any(v is None for v in mins):
        raise UsageError(f"csv file {path!r} has no data rows")
    return closed_box(zip(mins, maxs))


def _resolve_domain(args, m: Ensemble) -> Box:
    if getattr(args, "domain", None):
        return _domain_from_file(args.domain, m)
    if getattr(args, "domain_csv", None):
        return _domain_from_csv(args.domain_csv, m)
    raise UsageError("either --domain or --domain-csv is required")


def _solver_config(args, config: dict, timeout: float) -> SolverConfig:
    command = None
    if getattr(args, "solver", None):
        command = args.solver
    elif os.environ.get(SOLVER_ENV_VAR):
        command = None  # SolverConfig reads the environment
    elif config.get("solver_cmd"):
        command = config["solver_cmd"]
    return SolverConfig(
        command=command,
        timeout=timeout,
        persistent=bool(getattr(args, "persistent_solver", False)),
        dump_dir=getattr(args, "dump_scripts", None),
    )


def _pick(args, config: dict, key: str, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def _parameters(args, config: dict) -> Parameters:
    try:
        return Parameters(
            r_a=_pick(args, config, "r_a", 100),
            r_b=float(_pick(args, config, "r_b", 10.0)),
            r_c=int(_pick(args, config, "r_c", 10)),
            per_call_timeout=float(_pick(args, config, "per_call_timeout", 60.0)),
            total_budget=_pick(args, config, "total_budget", None),
            seed=int(_pick(args, config, "seed", 0)),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _point_from_text(text: str, expected_dims: int) -> tuple[Fraction, ...]:
    try:
        values = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--input must be a JSON array: {exc}") from exc
    if not isinstance(values, list) or len(values) != expected_dims:
        raise UsageError(f"--input must be a JSON array of {expected_dims} values")
    point = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, str, float)):
            raise UsageError(f"unsupported coordinate {v!r}")
        point.append(to_fraction(str(v) if isinstance(v, float) else v))
    return tuple(point)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_verify(args) -> int:
    config = _load_config(args.config)
    m, _ = _load_model_file(args.model)
    phi = _parse_property_text(args.property)
    X = _resolve_domain(args, m)
    timeout = float(_pick(args, config, "per_call_timeout", 60.0))
    try:
        result = check_sat(m, phi, ConstraintSet(domain=X), _solver_config(args, config, timeout))
    except PropertyBindError as exc:
        raise UsageError(str(exc)) from exc
    if isinstance(result, Unsat):
        print("unsat")
        return EXIT_OK
    if isinstance(result, Unknown):
        print(f"unknown ({result.reason})")
        return EXIT_ENVIRONMENT
    assert isinstance(result, Sat)
    print("sat")
    print(
        json.dumps(
            {
                "x": [format_fraction(v) for v in result.x],
                "y": format_fraction(result.y),
            }
        )
    )
    return EXIT_VIOLATED


def _ranges_file_payload(report: DetectionReport, model_bytes: bytes, property_text: str, params: Parameters) -> dict:
    return {
        "ranges": [box_to_json(b) for b in report.vranges],
        "meta": {
            "model_hash": hashlib.sha256(model_bytes).hexdigest(),
            "property_text": property_text,
            "parameters": {
                "r_a": format_fraction(to_fraction(params.r_a)),
                "r_b": params.r_b,
                "r_c": params.r_c,
                "per_call_timeout": params.per_call_timeout,
                "total_budget": params.total_budget,
                "seed": params.seed,
            },
        },
    }


def cmd_extract(args) -> int:
    config = _load_config(args.config)
    m, model_bytes = _load_model_file(args.model)
    phi = _parse_property_text(args.property)
    X = _resolve_domain(args, m)
    params = _parameters(args, config)
    solver_config = _solver_config(args, config, params.per_call_timeout)
    try:
        report = detect_violation_ranges(m, phi, X, params, solver_config=solver_config)
    except PropertyBindError as exc:
        raise UsageError(str(exc)) from exc

    payload = _ranges_file_payload(report, model_bytes, args.property, params)
    Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    if args.report:
        Path(args.report).write_text(json.dumps(report_to_dict(report), indent=2) + "\n", encoding="utf-8")
    print(format_report_table(report, [f.name for f in m.features]))
    print(f"wrote {len(report.vranges)} range(s) to {args.out}")
    return EXIT_OK


def _read_ranges_file(path: str) -> list[Box]:
    try:
        data = json.loads(_read_file(path, "ranges").decode("utf-8"))
        return [box_from_json(r) for r in data["ranges"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"ranges file {path!r}: {exc}") from exc


def cmd_filter_check(args) -> int:
    vranges = _read_ranges_file(args.ranges)
    dims = vranges[0].dims if vranges else None
    point_text = args.input
    if dims is None:
        # No ranges: any well-formed point is allowed.
        try:
            values = json.loads(point_text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--input must be a JSON array: {exc}") from exc
        if not isinstance(values, list):
            raise UsageError("--input must be a JSON array")
        print("allow")
        return EXIT_OK
    point = _point_from_text(point_text, dims)
    print("deny" if filter_check(vranges, point) else "allow")
    return EXIT_OK


def cmd_oracle(args) -> int:
    config = _load_config(args.config)
    m, _ = _load_model_file(args.model)
    phi = _parse_property_text(args.property)
    X = _resolve_domain(args, m)
    try:
        grid = GridSpec.from_box(X, m.kinds, cap=args.cap)
        violations = brute_force_violations(m, phi, grid)
    except (OracleError, PropertyBindError) as exc:
        raise UsageError(str(exc)) from exc
    print(f"{len(violations)} violating point(s) out of {grid.size}")
    if args.dump:
        points = [list(p) for p in sorted(violations)]
        Path(args.dump).write_text(json.dumps({"violations": points}, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {args.dump}")
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _load_config(args.config)
    values = [int(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise UsageError("--values must list at least one integer")
    base = {"n_est": args.n_est, "max_d": args.max_d, "s": args.s}
    seed = int(_pick(args, config, "seed", 0))
    rows = []
    for value in values:
        cell = dict(base)
        cell[args.vary] = value
        rng = random.Random(seed * 1_000_003 + value)
        m, X = random_ensemble(
            rng, cell["n_est"], cell["max_d"], cell["s"], low=0, high=args.domain_width, full=True
        )
        phi = _parse_property_text(args.property)
        params = Parameters(
            r_a=_pick(args, config, "r_a", 100),
            r_b=float(_pick(args, config, "r_b", 10.0)),
            r_c=int(_pick(args, config, "r_c", 10)),
            per_call_timeout=float(_pick(args, config, "per_call_timeout", 60.0)),
            total_budget=args.cell_budget,
            seed=seed,
        )
        solver_config = _solver_config(args, config, params.per_call_timeout)
        started = time.monotonic()
        report = detect_violation_ranges(m, phi, X, params, solver_config=solver_config)
        total = time.monotonic() - started
        row = {
            args.vary: value,
            "total_time_s": round(total, 3),
            "solver_time_s": round(report.totals.solver_time, 3),
            "solver_calls": report.totals.solver_calls,
            "avg_call_s": round(report.totals.avg_solver_call_time, 4),
        }
        rows.append(row)
        print(
            f"{args.vary}={value}: status={report.status} ranges={len(report.vranges)} "
            f"total={row['total_time_s']}s solver={row['solver_time_s']}s "
            f"calls={row['solver_calls']} avg={row['avg_call_s']}s"
        )
    with open(args.out, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=[args.vary, "total_time_s", "solver_time_s", "solver_calls", "avg_call_s"])
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser, *, domain: bool = True) -> None:
    parser.add_argument("--model", required=True, help="canonical model JSON file")
    parser.add_argument("--property", required=True, help="property text, e.g. 'y > 50000'")
    if domain:
        group = parser.add_mutually_exclusive_group(required=False)
        group.add_argument("--domain", help="domain JSON file with per-feature bounds")
        group.add_argument("--domain-csv", help="compute domain bounds from a CSV of training data")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--solver", help=f"solver command (default: ${SOLVER_ENV_VAR} or 'z3 -in')")
    parser.add_argument(
        "--persistent-solver",
        action="store_true",
        help="reuse one solver process for all calls instead of one process per call "
        "(an optimization for slow-to-start solvers; results are identical)",
    )


def _add_parameters(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--r-a", dest="r_a", help="probe resolution (domain width / r_a per dim)")
    parser.add_argument("--r-b", dest="r_b", type=float, help="division threshold, percent of domain volume")
    parser.add_argument("--r-c", dest="r_c", type=int, help="number of dividing orders to try")
    parser.add_argument("--per-call-timeout", dest="per_call_timeout", type=float, help="seconds per solver call")
    parser.add_argument("--total-budget", dest="total_budget", type=float, help="overall time budget in seconds")
    parser.add_argument("--seed", dest="seed", type=int, help="seed for dividing-order sampling")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tree-sentinel",
        description="Verify decision-tree ensembles against input/output properties and "
        "extract machine-readable violation ranges for input filtering.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="one satisfiability check")
    _add_common(p_verify)
    p_verify.add_argument("--per-call-timeout", dest="per_call_timeout", type=float)
    p_verify.add_argument("--dump-scripts", help="directory to dump emitted SMT-LIB scripts")
    p_verify.set_defaults(func=cmd_verify)

    p_extract = sub.add_parser("extract", help="detect and narrow violation ranges")
    _add_common(p_extract)
    _add_parameters(p_extract)
    p_extract.add_argument("--out", required=True, help="violation-range JSON file to write")
    p_extract.add_argument("--report", help="detection report JSON file to write")
    p_extract.add_argument("--dump-scripts", help="directory to dump emitted SMT-LIB scripts")
    p_extract.set_defaults(func=cmd_extract)

    p_filter = sub.add_parser("filter", help="runtime input-filter helpers")
    filter_sub = p_filter.add_subparsers(dest="filter_command", required=True)
    p_check = filter_sub.add_parser("check", help="test a point against a ranges file")
    p_check.add_argument("--ranges", required=True, help="violation-range JSON file")
    p_check.add_argument("--input", required=True, help="point as a JSON array, e.g. '[1, 2, 3]'")
    p_check.set_defaults(func=cmd_filter_check)

    p_oracle = sub.add_parser("oracle", help="brute-force violating points on an integer grid")
    _add_common(p_oracle)
    p_oracle.add_argument("--dump", help="JSON file for the violating points")
    p_oracle.add_argument("--cap", type=int, default=DEFAULT_GRID_CAP, help="maximum grid size")
    p_oracle.set_defaults(func=cmd_oracle)

    p_bench = sub.add_parser("bench", help="synthetic-model sweeps, CSV output")
    p_bench.add_argument("--vary", required=True, choices=["n_est", "max_d", "s"])
    p_bench.add_argument("--values", required=True, help="comma-separated sweep values")
    p_bench.add_argument("--n-est", dest="n_est", type=int, default=10)
    p_bench.add_argument("--max-d", dest="max_d", type=int, default=3)
    p_bench.add_argument("--s", dest="s", type=int, default=3)
    p_bench.add_argument("--property", default="y > 0")
    p_bench.add_argument("--domain-width", type=int, default=100)
    p_bench.add_argument("--out", required=True, help="CSV file to write")
    p_bench.add_argument("--cell-budget", type=float, default=120.0, help="time budget per sweep cell (s)")
    p_bench.add_argument("--config", help="JSON config file")
    p_bench.add_argument("--solver")
    p_bench.add_argument("--persistent-solver", action="store_true")
    _add_parameters(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT


if __name__ == "__main__":
    sys.exit(main())
