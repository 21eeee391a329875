"""Scenario files: parsing, validation and end-to-end simulation runs.

A scenario is a single JSON object; see README.md for the schema. Parsing
never raises on bad content: :func:`parse_scenario` returns diagnostics,
and only unreadable or non-JSON input raises :class:`ScenarioParseError`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .control import GapLoop, LinearizedGapPlant, PIDGains, iq_for_force
from .dispatch import DispatchProblem, Job, assign_greedy, assign_local_search, fleet_from_config
from .emfield import MagnetSpec, levitation_current_for_load
from .line import Command, LineRun, run
from .telemetry import RunSummary, TelemetryRecord, summarize
from .track import LineConfig, MoverSpec, Station, TrackSegment, validate


class ScenarioParseError(Exception):
    pass


@dataclass(frozen=True)
class Motor:
    psi_d: float = 0.5
    psi_q: float = 0.1
    tau: float = 0.05


@dataclass(frozen=True)
class Actuator:
    turns: int = 100
    pole_area: float = 1e-4
    gap: float = 1e-3


@dataclass(frozen=True)
class Resistance:
    friction: float = 0.0
    drag_coefficient: float = 0.0


@dataclass
class Scenario:
    line: LineConfig
    dt: float
    t_end: float
    rng_seed: int = 0
    gains: PIDGains | None = None
    motor: Motor = field(default_factory=Motor)
    actuator: Actuator = field(default_factory=Actuator)
    resistance: Resistance = field(default_factory=Resistance)
    magnet: MagnetSpec | None = None
    jobs: tuple[Job, ...] = ()
    script: tuple[Command, ...] = ()
    congestion: dict[str, float] = field(default_factory=dict)
    name: str = ""


def read_scenario_file(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioParseError(f"{path}: top level must be a JSON object")
    return data


class _Fields:
    """Typed field access that records a diagnostic instead of raising."""

    def __init__(self, diags: list[str]):
        self.diags = diags

    def get(self, obj: Any, key: str, where: str, kind: str = "number", default: Any = ..., required: bool = True):
        name = f"{where}.{key}" if where else key
        if not isinstance(obj, dict):
            self.diags.append(f"{where or 'scenario'} must be an object")
            return None
        if key not in obj:
            if default is not ...:
                return default
            if required:
                self.diags.append(f"missing required field '{name}'")
            return None
        value = obj[key]
        if kind == "number":
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                self.diags.append(f"field '{name}' must be a finite number, got {value!r}")
                return None
            return float(value)
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                self.diags.append(f"field '{name}' must be an integer, got {value!r}")
                return None
            return value
        if kind == "str":
            if not isinstance(value, str):
                self.diags.append(f"field '{name}' must be a string, got {value!r}")
                return None
            return value
        if kind == "list":
            if not isinstance(value, list):
                self.diags.append(f"field '{name}' must be a list")
                return None
            return value
        if kind == "object":
            if not isinstance(value, dict):
                self.diags.append(f"field '{name}' must be an object")
                return None
            return value
        raise AssertionError(kind)


def parse_scenario(data: dict) -> tuple[Scenario | None, list[str]]:
    """Build a :class:`Scenario`; returns (None, diagnostics) if anything is wrong."""
    diags: list[str] = []
    f = _Fields(diags)
    dt = f.get(data, "dt", "")
    t_end = f.get(data, "t_end", "")
    rng_seed = f.get(data, "rng_seed", "", kind="int", default=0)
    name = f.get(data, "name", "", kind="str", default="")
    if dt is not None and dt <= 0:
        diags.append(f"field 'dt' must be positive, got {dt}")
    if t_end is not None and t_end < 0:
        diags.append(f"field 't_end' must be non-negative, got {t_end}")

    line_obj = f.get(data, "line", "", kind="object")
    segments, stations, movers = [], [], []
    min_headway = None
    if line_obj is not None:
        min_headway = f.get(line_obj, "min_headway", "line")
        for i, s in enumerate(f.get(line_obj, "segments", "line", kind="list") or []):
            where = f"line.segments[{i}]"
            vals = (
                f.get(s, "id", where, "str"), f.get(s, "from", where, "str"), f.get(s, "to", where, "str"),
                f.get(s, "length", where), f.get(s, "v_limit", where), f.get(s, "a_limit", where),
            )
            if None not in vals:
                segments.append(TrackSegment(*vals))
        for i, s in enumerate(f.get(line_obj, "stations", "line", kind="list", default=[]) or []):
            where = f"line.stations[{i}]"
            vals = (
                f.get(s, "id", where, "str"), f.get(s, "node", where, "str"),
                f.get(s, "process_time", where, default=0.0), f.get(s, "name", where, "str", default=""),
            )
            if None not in vals:
                stations.append(Station(*vals))
        for i, m in enumerate(f.get(line_obj, "movers", "line", kind="list", default=[]) or []):
            where = f"line.movers[{i}]"
            vals = dict(
                id=f.get(m, "id", where, "str"),
                home=f.get(m, "home", where, "str"),
                mass=f.get(m, "mass", where, default=1.0),
                gap=f.get(m, "gap", where, default=None),
                segment=f.get(m, "segment", where, "str", default=None),
                offset=f.get(m, "offset", where, default=None),
            )
            if None not in (vals["id"], vals["home"], vals["mass"]):
                movers.append(vals)

    actuator = Actuator()
    if "actuator" in data:
        a = f.get(data, "actuator", "", kind="object")
        if a is not None:
            vals = (
                f.get(a, "turns", "actuator", "int", default=actuator.turns),
                f.get(a, "pole_area", "actuator", default=actuator.pole_area),
                f.get(a, "gap", "actuator", default=actuator.gap),
            )
            if None not in vals:
                if vals[0] < 1 or vals[1] <= 0 or vals[2] <= 0:
                    diags.append("actuator: turns, pole_area and gap must be positive")
                else:
                    actuator = Actuator(*vals)

    mover_specs = tuple(
        MoverSpec(m["id"], m["home"], m["mass"], actuator.gap if m["gap"] is None else m["gap"], m["segment"], m["offset"])
        for m in movers
    )
    line = None
    if dt is not None and min_headway is not None:
        line = LineConfig(tuple(segments), tuple(stations), mover_specs, min_headway, dt)
        diags.extend(validate(line))

    gains = None
    if "controller" in data:
        c = f.get(data, "controller", "", kind="object")
        if c is not None:
            vals = dict(
                kp=f.get(c, "kp", "controller"),
                ki=f.get(c, "ki", "controller", default=0.0),
                kd=f.get(c, "kd", "controller", default=0.0),
                output_min=f.get(c, "output_min", "controller", default=-math.inf),
                output_max=f.get(c, "output_max", "controller", default=math.inf),
                integral_limit=f.get(c, "integral_limit", "controller", default=math.inf),
            )
            if None not in vals.values():
                try:
                    gains = PIDGains(**vals)
                except ValueError as exc:
                    diags.append(f"controller: {exc}")

    motor = Motor()
    if "motor" in data:
        mo = f.get(data, "motor", "", kind="object")
        if mo is not None:
            vals = (
                f.get(mo, "psi_d", "motor", default=motor.psi_d),
                f.get(mo, "psi_q", "motor", default=motor.psi_q),
                f.get(mo, "tau", "motor", default=motor.tau),
            )
            if None not in vals:
                if vals[0] == 0 or vals[2] <= 0:
                    diags.append("motor: psi_d must be non-zero and tau positive")
                else:
                    motor = Motor(*vals)

    resistance = Resistance()
    if "resistance" in data:
        r = f.get(data, "resistance", "", kind="object")
        if r is not None:
            vals = (f.get(r, "friction", "resistance", default=0.0), f.get(r, "drag_coefficient", "resistance", default=0.0))
            if None not in vals:
                if min(vals) < 0:
                    diags.append("resistance: friction and drag_coefficient must be non-negative")
                else:
                    resistance = Resistance(*vals)

    magnet = None
    if "magnet" in data:
        mg = f.get(data, "magnet", "", kind="object")
        if mg is not None:
            vals = (f.get(mg, "remanence", "magnet"), f.get(mg, "volume", "magnet"), f.get(mg, "density", "magnet", default=7500.0))
            if None not in vals:
                try:
                    magnet = MagnetSpec(*vals)
                except ValueError as exc:
                    diags.append(f"magnet: {exc}")

    targets = set()
    if line is not None:
        targets = set(line.nodes) | {s.id for s in line.stations}
    mover_ids = {m.id for m in mover_specs}

    jobs = []
    for i, j in enumerate(f.get(data, "jobs", "", kind="list", default=[]) or []):
        where = f"jobs[{i}]"
        vals = (
            f.get(j, "id", where, "str"), f.get(j, "station", where, "str"),
            f.get(j, "processing_time", where, default=0.0), f.get(j, "release_time", where, default=0.0),
        )
        if None in vals:
            continue
        if line is not None and vals[1] not in targets:
            diags.append(f"{where}: job {vals[0]!r} references unknown station {vals[1]!r}")
        if vals[2] < 0 or vals[3] < 0:
            diags.append(f"{where}: job times must be non-negative")
            continue
        jobs.append(Job(*vals))

    script = []
    for i, c in enumerate(f.get(data, "script", "", kind="list", default=[]) or []):
        where = f"script[{i}]"
        t = f.get(c, "t", where)
        mover = f.get(c, "mover", where, "str")
        target = None
        if isinstance(c, dict):
            for key in ("station", "node", "target"):
                if key in c:
                    target = f.get(c, key, where, "str")
                    break
            else:
                diags.append(f"missing required field '{where}.station'")
        if None in (t, mover, target):
            continue
        if mover not in mover_ids:
            diags.append(f"{where}: unknown mover {mover!r}")
        if line is not None and target not in targets:
            diags.append(f"{where}: unknown station or node {target!r}")
        script.append(Command(t, mover, target))
    if [c.t for c in script] != sorted(c.t for c in script):
        diags.append("script: commands must be sorted by time")

    congestion = {}
    for seg_id, mult in (f.get(data, "congestion", "", kind="object", default={}) or {}).items():
        if isinstance(mult, bool) or not isinstance(mult, (int, float)) or not (math.isfinite(mult) and mult >= 1):
            diags.append(f"congestion: multiplier for {seg_id!r} must be a number >= 1")
        elif line is not None and seg_id not in line.segment_by_id:
            diags.append(f"congestion: unknown segment {seg_id!r}")
        else:
            congestion[seg_id] = float(mult)

    if diags or line is None:
        return None, diags
    scenario = Scenario(
        line=line, dt=dt, t_end=t_end, rng_seed=rng_seed, gains=gains, motor=motor, actuator=actuator,
        resistance=resistance, magnet=magnet, jobs=tuple(jobs), script=tuple(script),
        congestion=congestion, name=name,
    )
    return scenario, []


def load_scenario(path: str | Path) -> tuple[Scenario | None, list[str]]:
    return parse_scenario(read_scenario_file(path))


@dataclass
class SimulationResult:
    run: LineRun
    records: list[TelemetryRecord]
    summary: RunSummary


def _drive_current(scn: Scenario, mass: float, v: float, a: float) -> float:
    res = scn.resistance
    resist = res.friction + res.drag_coefficient * abs(v)
    force = mass * a + (resist if v > 0 else -resist if v < 0 else 0.0)
    return iq_for_force(scn.motor.psi_d, scn.motor.tau, force)


def simulate(scn: Scenario) -> SimulationResult:
    """Run the line script and attach levitation and drive currents to every sample.

    With controller gains each mover's gap is regulated by a PID loop from
    its initial gap; without them the gap is held at the actuator setpoint
    by the static levitation current for the mover's mass.
    """
    result = run(scn.line, scn.script, scn.t_end)
    dt = scn.dt
    by_tick: dict[tuple[int, str], list[str]] = {}
    for e in result.events:
        by_tick.setdefault((round(e.t / dt), e.mover), []).append(e.kind)
    act = scn.actuator
    movers = {m.id: m for m in scn.line.movers}
    columns = {}
    for mover_id, trace in result.traces.items():
        spec = movers[mover_id]
        n = len(trace.t)
        if scn.gains is not None:
            plant = LinearizedGapPlant(spec.mass, act.turns, act.pole_area, act.gap)
            loop = GapLoop(plant, scn.gains, spec.gap)
            gaps, currents = [spec.gap], [plant.bias_current]
            for _ in range(n - 1):
                g, i = loop.step(dt)
                gaps.append(g)
                currents.append(i)
        else:
            i0 = levitation_current_for_load(act.turns, act.pole_area, act.gap, spec.mass)
            gaps, currents = [act.gap] * n, [i0] * n
        iq = [
            _drive_current(scn, spec.mass, float(v), float(a))
            for v, a in zip(trace.velocity, trace.acceleration)
        ]
        columns[mover_id] = (trace, gaps, currents, iq)
    records = []
    ids = sorted(columns)
    n_ticks = len(next(iter(columns.values()))[0].t) if columns else 0
    for k in range(n_ticks):
        for mover_id in ids:
            trace, gaps, currents, iq = columns[mover_id]
            records.append(
                TelemetryRecord(
                    float(trace.t[k]), mover_id, float(trace.position[k]), float(trace.velocity[k]),
                    float(gaps[k]), float(currents[k]), float(iq[k]),
                    ";".join(by_tick.get((k, mover_id), ())),
                )
            )
    summary = summarize(records, result.events, duration=n_ticks and float(n_ticks - 1) * dt)
    return SimulationResult(result, records, summary)


def dispatch(scn: Scenario, iterations: int = 200):
    """Greedy schedule of the scenario's jobs, refined by local search seeded from rng_seed."""
    problem = DispatchProblem.build(fleet_from_config(scn.line), scn.jobs, scn.line, scn.congestion)
    greedy = assign_greedy(problem)
    return greedy, assign_local_search(greedy, iterations, scn.rng_seed)
