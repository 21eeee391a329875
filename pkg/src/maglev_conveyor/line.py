"""Fixed-step simulation of several movers sharing a conveyor track.

Motion model
    A mover drives each segment of its route as a rest-to-rest trapezoid
    under that segment's limits, so it is always at rest on a node.

Headway rule
    Every tick a mover checks that, at its candidate next state, its full
    braking stop point still lies ``min_headway`` behind its nearest
    obstacle: the mover ahead on the same segment, or the end node of the
    segment if the mover does not hold that node's lock. If not, it brakes
    at the segment's a_limit until at rest and re-plans. Leaders never move
    backwards, so the stop point never overruns the obstacle.

Node locks
    A mover must hold the lock of a node to come within ``min_headway`` of
    it. Locks are requested by the front mover of a segment once it is
    within stopping range, granted first-come-first-served by request tick
    (ties by mover id), and released once the holder is ``min_headway``
    past the node. A mover entering a segment also waits until every mover
    that left the same node is at least ``min_headway`` down its segment.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .control import MotionProfile, plan_trapezoid
from .dispatch import route
from .dynamics import step_count
from .track import LineConfig, Station, validate

IDLE, MOVING, DWELL = "idle", "moving", "dwell"
_EPS = 1e-9  # m, safety margin absorbing rounding in the stop-point test


class LineError(ValueError):
    pass


class SimulationError(LineError):
    """A failure while advancing the line, tagged with the tick it happened on."""

    def __init__(self, msg: str, tick: int, t: float):
        super().__init__(f"tick {tick} (t={t:g} s): {msg}")
        self.tick = tick
        self.t = t


class LineCommandError(LineError):
    pass


@dataclass(frozen=True)
class Command:
    """Send ``mover`` to ``target`` (a station id or node id) at time ``t``."""

    t: float
    mover: str
    target: str


@dataclass(frozen=True)
class Event:
    t: float
    kind: str
    mover: str
    node: str | None = None
    station: str | None = None
    other: str | None = None

    def to_json(self) -> dict:
        out = {"t": self.t, "kind": self.kind, "mover": self.mover}
        for key in ("node", "station", "other"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


class MoverStatus:
    """Mutable per-mover simulation state."""

    __slots__ = (
        "id", "mass", "gap", "seg", "offset", "velocity", "accel", "odometer",
        "mode", "route", "goals", "goal", "profile", "profile_origin",
        "profile_target", "profile_tick", "braking", "blocked", "dwell_end", "dwell_station",
    )

    def __init__(self, id: str, seg: str, offset: float, mass: float, gap: float):
        self.id = id
        self.mass = mass
        self.gap = gap
        self.seg = seg
        self.offset = offset
        self.velocity = 0.0
        self.accel = 0.0
        self.odometer = 0.0
        self.mode = IDLE
        self.route: list[str] = []
        self.goals: deque[tuple[str, Station | None]] = deque()
        self.goal: tuple[str, Station | None] | None = None
        self.profile: MotionProfile | None = None
        self.profile_origin = 0.0
        self.profile_target = 0.0
        self.profile_tick = 0
        self.braking = False
        self.blocked = False
        self.dwell_end = 0
        self.dwell_station: Station | None = None

    def __repr__(self) -> str:
        return (
            f"MoverStatus({self.id!r}, seg={self.seg!r}, offset={self.offset:.6g}, "
            f"v={self.velocity:.6g}, mode={self.mode})"
        )


class _Layout:
    def __init__(self, config: LineConfig):
        self.config = config
        h, dt = config.min_headway, config.dt
        self.seg = {
            s.id: (s.length, s.v_limit, s.a_limit, s.from_node, s.to_node) for s in config.segments
        }
        # front mover must request the end-node lock before its stop point can reach it
        self.approach = {
            s.id: h + s.v_limit * s.v_limit / (2 * s.a_limit) + 2 * s.v_limit * dt for s in config.segments
        }
        self.out_ids = {n: tuple(s.id for s in segs) for n, segs in config.out_segments.items()}


@dataclass
class LineState:
    movers: list[MoverStatus]
    tick: int = 0
    dt: float = 1e-3
    events: list[Event] = field(default_factory=list)
    owners: dict[str, int] = field(default_factory=dict)
    requests: dict[str, dict[int, int]] = field(default_factory=dict)
    on_segment: dict[str, list[MoverStatus]] = field(default_factory=dict, repr=False)
    layout: _Layout | None = field(default=None, repr=False)

    @property
    def clock(self) -> float:
        return self.tick * self.dt

    def mover(self, mover_id: str) -> MoverStatus:
        for m in self.movers:
            if m.id == mover_id:
                return m
        raise LineCommandError(f"unknown mover {mover_id!r}")


def init_state(config: LineConfig) -> LineState:
    diags = validate(config)
    if diags:
        raise LineError("invalid line configuration: " + "; ".join(diags))
    layout = _Layout(config)
    movers = []
    for spec in sorted(config.movers, key=lambda m: m.id):
        seg, off = config.initial_placement(spec)
        movers.append(MoverStatus(spec.id, seg.id, float(off), spec.mass, spec.gap))
    state = LineState(movers=movers, dt=config.dt, layout=layout)
    state.on_segment = {s.id: [] for s in config.segments}
    for idx, m in enumerate(movers):
        state.on_segment[m.seg].append(m)
    h = config.min_headway
    for node in config.nodes:
        near = [
            (layout.seg[m.seg][0] - m.offset, m.id, idx)
            for idx, m in enumerate(movers)
            if layout.seg[m.seg][4] == node and layout.seg[m.seg][0] - m.offset < h
        ]
        if near:
            state.owners[node] = min(near)[2]
    return state


def _anchor_node(m: MoverStatus, layout: _Layout) -> str:
    if m.goals:
        return m.goals[-1][0]
    if m.mode == MOVING and m.goal is not None:
        return m.goal[0]
    return layout.seg[m.seg][4]


def _enqueue(state: LineState, config: LineConfig, commands: Iterable) -> None:
    layout = state.layout
    parsed = []
    pending: dict[str, str] = {}
    for cmd in commands:
        mover_id, target = (cmd.mover, cmd.target) if isinstance(cmd, Command) else cmd
        m = state.mover(mover_id)
        try:
            node, station = config.resolve_target(target)
        except KeyError:
            raise LineCommandError(f"command for mover {mover_id!r}: unknown station or node {target!r}") from None
        start = pending.get(m.id, _anchor_node(m, layout))
        if not route(config, start, node).found:
            raise LineCommandError(f"command for mover {mover_id!r}: {target!r} is unreachable from {start!r}")
        pending[m.id] = node
        parsed.append((m, node, station))
    for m, node, station in parsed:
        m.goals.append((node, station))


def _arrive(state: LineState, m: MoverStatus) -> None:
    node, station = m.goal
    t = state.clock
    state.events.append(Event(t, "arrival", m.id, node=node, station=station.id if station else None))
    if station is None:
        m.mode = IDLE
        return
    m.mode = DWELL
    m.dwell_station = station
    ticks = math.ceil(station.process_time / state.dt - 1e-9)
    m.dwell_end = state.tick + max(ticks, 0)
    if ticks <= 0:
        _complete(state, m)


def _complete(state: LineState, m: MoverStatus) -> None:
    st = m.dwell_station
    state.events.append(Event(state.clock, "completion", m.id, node=st.node, station=st.id))
    m.dwell_station = None
    m.mode = IDLE


def _start_goal(state: LineState, config: LineConfig, m: MoverStatus) -> None:
    layout = state.layout
    m.goal = m.goals.popleft()
    length, _, _, _, end_node = layout.seg[m.seg]
    m.route = list(route(config, end_node, m.goal[0]).segments)
    m.profile = None
    m.braking = False
    if m.offset >= length and not m.route:
        _arrive(state, m)
    else:
        m.mode = MOVING


def _update_locks(state: LineState, h: float) -> None:
    layout = state.layout
    movers = state.movers
    owners = state.owners
    for node in [n for n, idx in owners.items()]:
        m = movers[owners[node]]
        _, _, _, frm, to = layout.seg[m.seg]
        if to == node:
            continue
        if frm != node or m.offset >= h:
            del owners[node]
    tick = state.tick
    requests = state.requests
    for idx, m in enumerate(movers):
        if m.mode != MOVING:
            continue
        length, _, _, _, node = layout.seg[m.seg]
        if owners.get(node) == idx or length - m.offset > layout.approach[m.seg]:
            continue
        if any(o.offset > m.offset for o in state.on_segment[m.seg] if o is not m):
            continue
        requests.setdefault(node, {}).setdefault(idx, tick)
    for node in sorted(requests):
        pending = requests[node]
        if pending and node not in owners:
            idx = min(pending, key=lambda i: (pending[i], movers[i].id))
            owners[node] = idx
            del pending[idx]


def _entry_clear(state: LineState, node: str, m: MoverStatus, h: float) -> bool:
    for seg_id in state.layout.out_ids[node]:
        for o in state.on_segment[seg_id]:
            if o is not m and o.offset < h:
                return False
    return True


def advance(state: LineState, config: LineConfig, commands: Iterable = ()) -> LineState:
    """Advance the line by one tick of ``config.dt``; ``state`` is updated in place and returned.

    ``commands`` are (mover id, target) pairs or :class:`Command` objects;
    each queues a goal behind the mover's current one. All commands are
    checked before any state changes.
    """
    layout = state.layout
    if layout is None or layout.config is not config:
        raise LineError("state was not initialised from this config")
    if commands:
        _enqueue(state, config, commands)
    state.tick += 1
    tick = state.tick
    dt = config.dt
    h = config.min_headway
    movers = state.movers
    owners = state.owners
    on_segment = state.on_segment
    seg_info = layout.seg

    for m in movers:
        while m.mode == IDLE and m.goals:
            _start_goal(state, config, m)

    _update_locks(state, h)

    for idx, m in enumerate(movers):
        if m.mode != MOVING:
            m.velocity = m.accel = 0.0
            continue
        length, vlim, alim, _, end_node = seg_info[m.seg]
        if m.offset >= length:
            # at rest on the end node, waiting to enter the next segment
            if owners.get(end_node) == idx and _entry_clear(state, end_node, m, h):
                on_segment[m.seg].remove(m)
                m.seg = m.route.pop(0)
                on_segment[m.seg].append(m)
                m.offset = 0.0
                m.profile = None
                length, vlim, alim, _, end_node = seg_info[m.seg]
            else:
                m.velocity = m.accel = 0.0
                continue
        off = m.offset
        v = m.velocity
        leader = None
        obstacle = math.inf
        for o in on_segment[m.seg]:
            if o is not m and off < o.offset < obstacle:
                obstacle = o.offset
                leader = o
        node_blocks = owners.get(end_node) != idx
        # a leader on the segment always binds before the node does
        limit = min(obstacle, length if node_blocks else math.inf) - h - _EPS
        if m.braking:
            new_off, new_v = _brake(off, v, alim, dt)
            m.accel = -alim
            if new_v == 0.0:
                m.braking = False
                m.profile = None
        else:
            prof = m.profile
            if prof is None:
                # plan to stop short of a parked leader or a node lock we are queued for
                target = length
                if leader is not None:
                    if leader.velocity == 0.0:
                        target = limit - _EPS
                elif node_blocks and idx in state.requests.get(end_node, ()):
                    target = limit - _EPS
                if target > off:
                    prof = m.profile = plan_trapezoid(target - off, vlim, alim)
                    m.profile_origin = off
                    m.profile_target = target
                    m.profile_tick = tick - 1
            if prof is None:
                cand = None
            else:
                pt = (tick - m.profile_tick) * dt
                if pt >= prof.total_time:
                    cand = (m.profile_target, 0.0, 0.0)
                else:
                    x, cv, ca = _sample(prof, pt)
                    cand = (m.profile_origin + x, cv, ca)
            if cand is not None and cand[0] + cand[1] * cand[1] / (2.0 * alim) <= limit:
                new_off, new_v, m.accel = cand
                m.blocked = False
                if new_v == 0.0 and cand is not None and pt >= prof.total_time:
                    m.profile = None
            else:
                if not m.blocked:
                    m.blocked = True
                    if leader is not None:
                        state.events.append(Event(state.clock, "headway", m.id, other=leader.id))
                    else:
                        state.events.append(Event(state.clock, "junction_hold", m.id, node=end_node))
                if v > 0.0:
                    m.braking = True
                    new_off, new_v = _brake(off, v, alim, dt)
                    m.accel = -alim
                    if new_v == 0.0:
                        m.braking = False
                        m.profile = None
                else:
                    # hold position; any plan from here is unchanged, so just restart its clock
                    new_off, new_v = off, 0.0
                    m.accel = 0.0
                    m.profile_tick = tick
        if new_off > length:
            new_off = length
        m.odometer += new_off - off
        m.offset = new_off
        m.velocity = new_v
        if new_off >= length and new_v == 0.0 and not m.braking:
            m.profile = None
            m.accel = 0.0
            if not m.route:
                _arrive(state, m)
    for m in movers:
        if m.mode == DWELL and tick >= m.dwell_end:
            _complete(state, m)
    return state


def _brake(off: float, v: float, alim: float, dt: float) -> tuple[float, float]:
    v_new = v - alim * dt
    if v_new > 0.0:
        return off + v * dt - 0.5 * alim * dt * dt, v_new
    return off + v * v / (2.0 * alim), 0.0


def _sample(prof: MotionProfile, t: float) -> tuple[float, float, float]:
    knots = prof.knots
    phases = prof.phases
    k = len(knots) - 1
    while knots[k][0] > t:
        k -= 1
    t0, x0, v0 = knots[k]
    acc = phases[k][1]
    tau = t - t0
    return x0 + v0 * tau + 0.5 * acc * tau * tau, v0 + acc * tau, acc


@dataclass
class MoverTrace:
    """Per-tick samples of one mover; ``position`` is the odometer (distance along track)."""

    t: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    segment: list[str]
    offset: np.ndarray


@dataclass
class LineRun:
    state: LineState
    events: list[Event]
    traces: dict[str, MoverTrace]


def tick_count(t_end: float, dt: float) -> int:
    """Whole ticks needed for the clock to reach ``t_end``."""
    n, tail = step_count(t_end, dt)
    return n + (1 if tail > 0 else 0)


def run(config: LineConfig, script: Sequence[Command], t_end: float, record: bool = True) -> LineRun:
    """Replay a timed command script from the initial layout until ``t_end``.

    A command with time t is applied on the first tick that starts at or
    after t.
    """
    if t_end < 0:
        raise LineError("t_end must be non-negative")
    times = [c.t for c in script]
    if times != sorted(times):
        raise LineError("script commands must be sorted by time")
    state = init_state(config)
    dt = config.dt
    n_ticks = tick_count(t_end, dt)
    movers = state.movers
    rec = {m.id: ([], [], [], [], []) for m in movers} if record else {}

    def sample():
        for m in movers:
            pos, vel, acc, seg, off = rec[m.id]
            pos.append(m.odometer)
            vel.append(m.velocity)
            acc.append(m.accel)
            seg.append(m.seg)
            off.append(m.offset)

    if record:
        sample()
    i = 0
    for _ in range(n_ticks):
        start = state.tick * dt
        j = i
        while j < len(script) and script[j].t <= start + 1e-9 * dt:
            j += 1
        target = state.tick + 1
        try:
            advance(state, config, script[i:j])
        except (LineError, ArithmeticError) as exc:
            raise SimulationError(str(exc), target, target * dt) from exc
        i = j
        if record:
            sample()
    traces = {}
    if record:
        ts = np.arange(n_ticks + 1) * dt
        for m in movers:
            pos, vel, acc, seg, off = rec[m.id]
            traces[m.id] = MoverTrace(ts, np.array(pos), np.array(vel), np.array(acc), seg, np.array(off))
    return LineRun(state, state.events, traces)
