"""Congestion-aware routing and job-to-mover assignment.

Travel between nodes costs the rest-to-rest trapezoid time of each segment,
scaled by that segment's congestion multiplier, which is exactly how the
line simulator moves a mover (it stops at every node). Schedules are
evaluated by a single timing rule: a mover travels from its current node
to the job's station, starts the job no earlier than its release time,
and is free at the station when processing ends.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .control import profile_time
from .track import LineConfig, TrackSegment


class NoRouteError(ValueError):
    pass


class UnknownNodeError(KeyError):
    pass


class InstanceTooLargeError(ValueError):
    pass


MAX_BRUTE_JOBS = 8
MAX_BRUTE_MOVERS = 4


def _check_congestion(congestion: Mapping[str, float] | None) -> Mapping[str, float]:
    congestion = congestion or {}
    for seg_id, mult in congestion.items():
        if not (math.isfinite(mult) and mult >= 1.0):
            raise ValueError(f"congestion multiplier for {seg_id!r} must be finite and >= 1, got {mult!r}")
    return congestion


def segment_cost(seg: TrackSegment, congestion: Mapping[str, float] | None = None) -> float:
    mult = congestion.get(seg.id, 1.0) if congestion else 1.0
    return profile_time(seg.length, seg.v_limit, seg.a_limit) * mult


@dataclass(frozen=True)
class Route:
    nodes: tuple[str, ...]
    segments: tuple[str, ...]
    eta: float

    @property
    def found(self) -> bool:
        return math.isfinite(self.eta)

    def to_json(self) -> dict:
        if not self.found:
            return {"path": None, "segments": None, "eta": None}
        return {"path": list(self.nodes), "segments": list(self.segments), "eta": self.eta}


NO_ROUTE = Route((), (), math.inf)


def _best_edges(config: LineConfig, congestion) -> dict[str, list[tuple[str, float, str]]]:
    """Cheapest segment between each ordered node pair; ties go to the smaller segment id."""
    best: dict[tuple[str, str], tuple[float, str]] = {}
    for seg in config.segments:
        key = (seg.from_node, seg.to_node)
        cand = (segment_cost(seg, congestion), seg.id)
        if key not in best or cand < best[key]:
            best[key] = cand
    adj: dict[str, list[tuple[str, float, str]]] = {n: [] for n in config.nodes}
    for (a, b), (cost, seg_id) in sorted(best.items()):
        adj[a].append((b, cost, seg_id))
    return adj


def route(
    config: LineConfig,
    from_node: str,
    to_node: str,
    congestion: Mapping[str, float] | None = None,
) -> Route:
    """Minimum-ETA path; equal ETAs resolve to the lexicographically smallest node path.

    Returns :data:`NO_ROUTE` (infinite eta) when ``to_node`` is unreachable.
    """
    for node in (from_node, to_node):
        if node not in config.nodes:
            raise UnknownNodeError(node)
    congestion = _check_congestion(congestion)
    if from_node == to_node:
        return Route((from_node,), (), 0.0)
    adj = _best_edges(config, congestion)
    heap: list[tuple[float, tuple[str, ...], tuple[str, ...]]] = [(0.0, (from_node,), ())]
    done: set[str] = set()
    while heap:
        cost, path, segs = heapq.heappop(heap)
        node = path[-1]
        if node in done:
            continue
        if node == to_node:
            return Route(path, segs, cost)
        done.add(node)
        for nxt, c, seg_id in adj[node]:
            if nxt not in done:
                heapq.heappush(heap, (cost + c, path + (nxt,), segs + (seg_id,)))
    return NO_ROUTE


class TravelTimes:
    """Memoised route ETAs over one layout and congestion map."""

    def __init__(self, config: LineConfig, congestion: Mapping[str, float] | None = None):
        self.config = config
        self.congestion = _check_congestion(congestion)
        self._cache: dict[tuple[str, str], float] = {}

    def __call__(self, a: str, b: str) -> float:
        key = (a, b)
        if key not in self._cache:
            self._cache[key] = route(self.config, a, b, self.congestion).eta
        return self._cache[key]


# --- scheduling -------------------------------------------------------------


@dataclass(frozen=True)
class Job:
    id: str
    station: str
    processing_time: float = 0.0
    release_time: float = 0.0

    def __post_init__(self):
        if self.processing_time < 0 or self.release_time < 0:
            raise ValueError(f"job {self.id!r}: times must be non-negative")


@dataclass(frozen=True)
class FleetMover:
    """A mover as the dispatcher sees it: where it becomes free, and when."""

    id: str
    node: str
    ready_time: float = 0.0


def fleet_from_config(config: LineConfig) -> list[FleetMover]:
    """Movers at their initial placements; a mover mid-segment is ready at the segment end."""
    fleet = []
    for m in sorted(config.movers, key=lambda m: m.id):
        seg, off = config.initial_placement(m)
        ready = profile_time(seg.length - off, seg.v_limit, seg.a_limit)
        fleet.append(FleetMover(m.id, seg.to_node, ready))
    return fleet


@dataclass
class DispatchProblem:
    movers: tuple[FleetMover, ...]
    jobs: tuple[Job, ...]
    station_node: dict[str, str]
    travel: TravelTimes

    @classmethod
    def build(
        cls,
        movers: Sequence[FleetMover],
        jobs: Sequence[Job],
        config: LineConfig,
        congestion: Mapping[str, float] | None = None,
    ) -> "DispatchProblem":
        station_node = {}
        for job in jobs:
            try:
                station_node[job.station], _ = config.resolve_target(job.station)
            except KeyError:
                raise NoRouteError(f"job {job.id!r} references unknown station {job.station!r}") from None
        return cls(tuple(movers), tuple(jobs), station_node, TravelTimes(config, congestion))

    @property
    def job_by_id(self) -> dict[str, Job]:
        return {j.id: j for j in self.jobs}


@dataclass
class Schedule:
    orders: dict[str, tuple[str, ...]]
    times: dict[str, tuple[float, float]]
    makespan: float
    problem: DispatchProblem = field(repr=False, compare=False)

    @property
    def total_completion(self) -> float:
        return sum(end for _, end in self.times.values())

    def to_json(self) -> dict:
        return {
            "makespan": self.makespan,
            "movers": {m: list(jobs) for m, jobs in self.orders.items()},
            "jobs": {j: {"start": s, "end": e} for j, (s, e) in sorted(self.times.items())},
        }


def evaluate(problem: DispatchProblem, orders: Mapping[str, Sequence[str]]) -> Schedule:
    """Time a job-to-mover assignment under the dispatcher's timing rule."""
    jobs = problem.job_by_id
    times: dict[str, tuple[float, float]] = {}
    makespan = 0.0
    for mover in problem.movers:
        t, node = mover.ready_time, mover.node
        for job_id in orders.get(mover.id, ()):
            job = jobs[job_id]
            dest = problem.station_node[job.station]
            start = max(t + problem.travel(node, dest), job.release_time)
            end = start + job.processing_time
            times[job_id] = (start, end)
            t, node = end, dest
            makespan = max(makespan, end)
    return Schedule({m.id: tuple(orders.get(m.id, ())) for m in problem.movers}, times, makespan, problem)


def schedule_violations(schedule: Schedule) -> list[str]:
    """Structural checks: every job once, release respected, no overlap with travel, makespan."""
    problem = schedule.problem
    out = []
    assigned = [j for seq in schedule.orders.values() for j in seq]
    if sorted(assigned) != sorted(j.id for j in problem.jobs):
        out.append("jobs are not assigned exactly once")
    jobs = problem.job_by_id
    for mover in problem.movers:
        t, node = mover.ready_time, mover.node
        for job_id in schedule.orders.get(mover.id, ()):
            start, end = schedule.times[job_id]
            job = jobs[job_id]
            dest = problem.station_node[job.station]
            if start < job.release_time:
                out.append(f"job {job_id} starts before release")
            if start + 1e-12 < t + problem.travel(node, dest):
                out.append(f"job {job_id} overlaps the previous job plus travel")
            if abs(end - start - job.processing_time) > 1e-9:
                out.append(f"job {job_id} duration mismatch")
            t, node = end, dest
    ends = [e for _, e in schedule.times.values()]
    if abs(schedule.makespan - max(ends, default=0.0)) > 0:
        out.append("makespan is not the latest job end")
    return out


def assign_greedy(problem: DispatchProblem) -> Schedule:
    """Jobs in release order, each to the mover that would finish it earliest."""
    state = {m.id: (m.ready_time, m.node) for m in problem.movers}
    orders: dict[str, list[str]] = {m.id: [] for m in problem.movers}
    for job in sorted(problem.jobs, key=lambda j: (j.release_time, j.id)):
        dest = problem.station_node[job.station]
        best = None
        for mover in problem.movers:
            t, node = state[mover.id]
            travel = problem.travel(node, dest)
            if not math.isfinite(travel):
                continue
            end = max(t + travel, job.release_time) + job.processing_time
            if best is None or end < best[0]:
                best = (end, mover.id)
        if best is None:
            raise NoRouteError(f"job {job.id!r}: station {job.station!r} is unreachable by every mover")
        end, mover_id = best
        orders[mover_id].append(job.id)
        state[mover_id] = (end, dest)
    return evaluate(problem, orders)


def _key(s: Schedule) -> tuple[float, float]:
    return (s.makespan, s.total_completion)


def _neighbours(orders: dict[str, tuple[str, ...]]):
    movers = list(orders)
    # relocate: take one job out and insert it anywhere (same or other mover)
    for a in movers:
        for p, job in enumerate(orders[a]):
            without = orders[a][:p] + orders[a][p + 1 :]
            for b in movers:
                base = without if b == a else orders[b]
                for q in range(len(base) + 1):
                    if b == a and q == p:
                        continue
                    new = dict(orders)
                    new[a] = without
                    new[b] = base[:q] + (job,) + base[q:]
                    yield new
    # swap: exchange the jobs at two positions
    slots = [(m, p) for m in movers for p in range(len(orders[m]))]
    for i, (a, p) in enumerate(slots):
        for b, q in slots[i + 1 :]:
            new = dict(orders)
            if a == b:
                seq = list(orders[a])
                seq[p], seq[q] = seq[q], seq[p]
                new[a] = tuple(seq)
            else:
                sa, sb = list(orders[a]), list(orders[b])
                sa[p], sb[q] = sb[q], sa[p]
                new[a], new[b] = tuple(sa), tuple(sb)
            yield new


def _kick(orders: dict[str, tuple[str, ...]], rng: random.Random, moves: int = 2):
    new = {m: list(seq) for m, seq in orders.items()}
    movers = sorted(new)
    for _ in range(moves):
        donors = [m for m in movers if new[m]]
        if not donors:
            break
        a = rng.choice(donors)
        job = new[a].pop(rng.randrange(len(new[a])))
        b = rng.choice(movers)
        new[b].insert(rng.randrange(len(new[b]) + 1), job)
    return {m: tuple(seq) for m, seq in new.items()}


def assign_local_search(seed: Schedule, iterations: int = 200, rng_seed: int = 0) -> Schedule:
    """Best-improvement relocate/swap descent with random restarts from the incumbent.

    Each iteration scans the whole neighbourhood and takes the best strictly
    improving move on (makespan, total completion time). At a local optimum
    the incumbent is perturbed by two random relocations. The best schedule
    seen is returned, so the makespan never exceeds the seed's.
    """
    if iterations <= 0:
        return seed
    problem = seed.problem
    rng = random.Random(rng_seed)
    best = current = seed
    for _ in range(iterations):
        cand = None
        for orders in _neighbours(current.orders):
            s = evaluate(problem, orders)
            if _key(s) < _key(current) and (cand is None or _key(s) < _key(cand)):
                cand = s
        if cand is not None:
            current = cand
            if _key(current) < _key(best):
                best = current
        else:
            current = evaluate(problem, _kick(best.orders, rng))
    return best


def brute_force(problem: DispatchProblem) -> Schedule:
    """Exact minimum-makespan schedule by exhaustive branch-and-bound.

    Every assignment with every per-mover ordering is enumerated once (mover
    by mover, jobs in id order); branches whose partial makespan already
    reaches the incumbent are cut. The first optimum in enumeration order wins.
    """
    n, m = len(problem.jobs), len(problem.movers)
    if n > MAX_BRUTE_JOBS or m > MAX_BRUTE_MOVERS:
        raise InstanceTooLargeError(
            f"brute force is limited to {MAX_BRUTE_JOBS} jobs and {MAX_BRUTE_MOVERS} movers, got {n} and {m}"
        )
    jobs = sorted(problem.jobs, key=lambda j: j.id)
    dest = [problem.station_node[j.station] for j in jobs]
    movers = problem.movers
    best_val = math.inf
    best_seq: list[list[int]] | None = None
    seqs: list[list[int]] = [[] for _ in movers]

    def floor_of(remaining: int) -> float:
        return max(
            (jobs[j].release_time + jobs[j].processing_time for j in range(n) if remaining >> j & 1),
            default=0.0,
        )

    def dfs(k: int, t: float, node: str, remaining: int, partial: float) -> None:
        nonlocal best_val, best_seq
        if max(partial, floor_of(remaining)) >= best_val:
            return
        if not remaining:
            best_val = partial
            best_seq = [list(s) for s in seqs]
            return
        for j in range(n):
            if remaining >> j & 1:
                job = jobs[j]
                end = max(t + problem.travel(node, dest[j]), job.release_time) + job.processing_time
                seqs[k].append(j)
                dfs(k, end, dest[j], remaining & ~(1 << j), max(partial, end))
                seqs[k].pop()
        if k + 1 < m:
            nxt = movers[k + 1]
            dfs(k + 1, nxt.ready_time, nxt.node, remaining, partial)

    if m == 0:
        if n:
            raise NoRouteError("no movers to assign jobs to")
        return evaluate(problem, {})
    dfs(0, movers[0].ready_time, movers[0].node, (1 << n) - 1, 0.0)
    if best_seq is None:
        raise NoRouteError("no feasible schedule; some station is unreachable")
    orders = {mv.id: tuple(jobs[j].id for j in seq) for mv, seq in zip(movers, best_seq)}
    return evaluate(problem, orders)
