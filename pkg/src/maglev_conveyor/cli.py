"""Command-line front end.

Exit codes: 0 success, 1 domain error (bad scenario content, unknown node,
simulation failure), 2 unreadable or unparseable input and output errors.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .dispatch import UnknownNodeError, route
from .line import LineError
from .scenario import ScenarioParseError, dispatch, parse_scenario, read_scenario_file, simulate
from .telemetry import dumps, trajectory_csv

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2

SWEEP_COLUMNS = ("value", "jobs_completed", "throughput", "energy_proxy", "headway_interventions", "total_distance")


class CliError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load(path: str):
    """Read and parse a scenario, raising CliError with the right exit code."""
    try:
        data = read_scenario_file(path)
    except ScenarioParseError as exc:
        raise CliError(str(exc), EXIT_IO) from exc
    return _parse(data)


def _parse(data: dict):
    scn, diags = parse_scenario(data)
    if diags:
        raise CliError("\n".join(diags), EXIT_DOMAIN)
    return scn


def write_outputs(scn, out_dir: Path) -> dict:
    """Simulate and write trajectory.csv, events.json and summary.json; returns the summary."""
    result = simulate(scn)
    events = [e.to_json() for e in result.run.events]
    summary = result.summary.to_json()
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "trajectory.csv").write_text(trajectory_csv(result.records))
        (out_dir / "events.json").write_text(dumps(events))
        (out_dir / "summary.json").write_text(dumps(summary))
    except OSError as exc:
        raise CliError(f"cannot write outputs to {out_dir}: {exc}", EXIT_IO) from exc
    return summary


def cmd_validate(args) -> int:
    _load(args.scenario)
    print("ok")
    return EXIT_OK


def cmd_simulate(args) -> int:
    scn = _load(args.scenario)
    try:
        write_outputs(scn, Path(args.out))
    except LineError as exc:
        raise CliError(f"simulation failed at {exc}", EXIT_DOMAIN) from exc
    return EXIT_OK


def cmd_route(args) -> int:
    scn = _load(args.scenario)
    try:
        r = route(scn.line, args.from_node, args.to_node, scn.congestion)
    except UnknownNodeError as exc:
        raise CliError(f"unknown node {exc.args[0]!r}", EXIT_DOMAIN) from exc
    print(json.dumps(r.to_json(), sort_keys=True))
    if not r.found:
        _err(f"no route from {args.from_node!r} to {args.to_node!r}")
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_dispatch(args) -> int:
    scn = _load(args.scenario)
    if not scn.jobs:
        raise CliError("scenario has no jobs", EXIT_DOMAIN)
    greedy, improved = dispatch(scn, args.iterations)
    print(dumps({"greedy": greedy.to_json(), "local_search": improved.to_json()}), end="")
    return EXIT_OK


def _split_path(param: str) -> list:
    keys = []
    for part in param.split("."):
        if not part:
            raise CliError(f"bad parameter path {param!r}", EXIT_DOMAIN)
        keys.append(int(part) if part.isdigit() else part)
    return keys


def set_param(data: dict, param: str, value: float) -> dict:
    """Copy of ``data`` with the numeric field at dotted path ``param`` replaced.

    Integer path components index into lists (``line.segments.0.v_limit``).
    Integer fields only accept whole values.
    """
    keys = _split_path(param)
    out = copy.deepcopy(data)
    node = out
    for key in keys[:-1]:
        try:
            node = node[key]
        except (KeyError, IndexError, TypeError):
            raise CliError(f"parameter {param!r} does not exist in the scenario", EXIT_DOMAIN) from None
    last = keys[-1]
    try:
        current = node[last]
    except (KeyError, IndexError, TypeError):
        raise CliError(f"parameter {param!r} does not exist in the scenario", EXIT_DOMAIN) from None
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise CliError(f"parameter {param!r} is not numeric (found {current!r})", EXIT_DOMAIN)
    if isinstance(current, int):
        if value != int(value):
            raise CliError(f"parameter {param!r} is an integer; cannot set {value!r}", EXIT_DOMAIN)
        value = int(value)
    node[last] = value
    return out


def _parse_values(text: str) -> list[float]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise CliError("--values is empty", EXIT_DOMAIN)
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise CliError(f"--values must be numbers, got {text!r}", EXIT_DOMAIN) from None


def _sweep_one(data: dict, out_dir: str) -> dict:
    scn = _parse(data)
    try:
        return write_outputs(scn, Path(out_dir))
    except LineError as exc:
        raise CliError(f"{out_dir}: simulation failed at {exc}", EXIT_DOMAIN) from exc


def cmd_sweep(args) -> int:
    try:
        data = read_scenario_file(args.scenario)
    except ScenarioParseError as exc:
        raise CliError(str(exc), EXIT_IO) from exc
    values = _parse_values(args.values)
    variants = [set_param(data, args.param, v) for v in values]
    out = Path(args.out)
    dirs = [str(out / f"{i:03d}_{args.param}={v:g}") for i, v in enumerate(values)]
    if args.jobs > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            summaries = list(pool.map(_sweep_one, variants, dirs))
    else:
        summaries = [_sweep_one(d, o) for d, o in zip(variants, dirs)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for v, s in zip(values, summaries):
        writer.writerow([
            repr(v), s["jobs_completed"], repr(s["throughput"]), repr(s["energy_proxy"]),
            s["headway_interventions"], repr(sum(s["distance_per_mover"].values())),
        ])
    try:
        (out / "sweep.csv").write_text(buf.getvalue())
    except OSError as exc:
        raise CliError(f"cannot write {out / 'sweep.csv'}: {exc}", EXIT_IO) from exc
    return EXIT_OK


def cmd_version(args) -> int:
    print(__version__)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maglev", description="Maglev conveyor line simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="run a scenario and write trajectory, events and summary")
    p.add_argument("scenario")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("route", help="fastest path between two nodes as JSON")
    p.add_argument("scenario")
    p.add_argument("--from", dest="from_node", required=True)
    p.add_argument("--to", dest="to_node", required=True)
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("sweep", help="simulate once per value of a numeric scenario field")
    p.add_argument("scenario")
    p.add_argument("--param", required=True, help="dotted path, e.g. line.min_headway")
    p.add_argument("--values", required=True, help="comma-separated numbers")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("dispatch", help="assign the scenario's jobs to movers")
    p.add_argument("scenario")
    p.add_argument("--iterations", type=int, default=200)
    p.set_defaults(func=cmd_dispatch)

    p = sub.add_parser("version", help="print the package version")
    p.set_defaults(func=cmd_version)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        _err(str(exc))
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
