"""Shared fixtures and independent oracles for the test suite."""

import itertools
import math

from maglev_conveyor.control import LinearizedGapPlant, PIDGains
from maglev_conveyor.track import LineConfig, MoverSpec, Station, TrackSegment


def gap_plant() -> LinearizedGapPlant:
    return LinearizedGapPlant(mass=1.0, turns=100, pole_area=1e-4, gap_setpoint=1e-3)


def gap_gains(plant: LinearizedGapPlant) -> PIDGains:
    """Gains placing all three closed-loop poles at s = -50 rad/s.

    Closed loop: s^3 + (kc kd/m) s^2 + ((kc kp - kg)/m) s + kc ki/m = (s + 50)^3.
    """
    m, kg, kc = plant.mass, plant.k_gap, plant.k_current
    return PIDGains(
        kp=(7500.0 * m + kg) / kc,
        ki=125000.0 * m / kc,
        kd=150.0 * m / kc,
        output_min=-10.0,
        output_max=plant.bias_current,
        integral_limit=1.0,
    )


def seg(id, a, b, length, v=2.0, acc=2.0):
    return TrackSegment(id, a, b, length, v, acc)


def diamond(congestion_short: float = 1.0):
    """Two routes A->D: short via B (2 + 2 m) and long via C (3 + 3 m)."""
    config = LineConfig(
        segments=(
            seg("ab", "A", "B", 2.0), seg("bd", "B", "D", 2.0),
            seg("ac", "A", "C", 3.0), seg("cd", "C", "D", 3.0),
        ),
    )
    return config, {"ab": congestion_short} if congestion_short != 1.0 else {}


def trapezoid_time(d, v, a):
    """Rest-to-rest minimum time, written out from the two regimes."""
    if d <= 0:
        return 0.0
    d_ramp = v * v / a
    if d <= d_ramp:
        return 2.0 * math.sqrt(d / a)
    return 2.0 * v / a + (d - d_ramp) / v


def enumerate_eta(config, src, dst, congestion=None):
    """Minimum ETA over all simple paths (networkx enumeration)."""
    import networkx as nx

    congestion = congestion or {}
    g = nx.MultiDiGraph()
    g.add_nodes_from(config.nodes)
    for s in config.segments:
        g.add_edge(s.from_node, s.to_node, key=s.id,
                   w=trapezoid_time(s.length, s.v_limit, s.a_limit) * congestion.get(s.id, 1.0))
    if src == dst:
        return 0.0
    best = math.inf
    for path in nx.all_simple_edge_paths(g, src, dst):
        best = min(best, sum(g.edges[e]["w"] for e in path))
    return best


def exhaustive_makespan(problem):
    """Minimum makespan over every assignment and ordering, by plain enumeration."""
    jobs = list(problem.jobs)
    movers = list(problem.movers)
    best = math.inf
    for assign in itertools.product(range(len(movers)), repeat=len(jobs)):
        groups = [[j for j, a in zip(jobs, assign) if a == k] for k in range(len(movers))]
        span = 0.0
        for mover, group in zip(movers, groups):
            best_mover = math.inf
            for perm in itertools.permutations(group):
                t, node = mover.ready_time, mover.node
                for job in perm:
                    dest = problem.station_node[job.station]
                    t = max(t + problem.travel(node, dest), job.release_time) + job.processing_time
                    node = dest
                best_mover = min(best_mover, t)
            span = max(span, best_mover if group else 0.0)
        best = min(best, span)
    return best


def straight_line(n_movers=0, length=10.0):
    return LineConfig(
        segments=(seg("s1", "N0", "N1", length),),
        stations=(Station("end", "N1", 0.0),),
        movers=tuple(MoverSpec(f"m{i}", "N0", segment="s1", offset=float(i)) for i in range(n_movers)),
        min_headway=0.5,
    )


def random_instance(rng, n_movers, n_jobs, n_nodes=5):
    """Random strongly connected layout (a ring plus chords) with a random job set."""
    from maglev_conveyor.dispatch import DispatchProblem, FleetMover, Job

    nodes = [f"n{i}" for i in range(n_nodes)]
    segs = []
    for i in range(n_nodes):
        segs.append(TrackSegment(f"r{i}", nodes[i], nodes[(i + 1) % n_nodes],
                                 rng.uniform(1, 6), rng.uniform(1, 3), rng.uniform(1, 4)))
    for k in range(rng.randint(1, n_nodes)):
        a, b = rng.sample(nodes, 2)
        segs.append(TrackSegment(f"c{k}", a, b, rng.uniform(1, 6), rng.uniform(1, 3), rng.uniform(1, 4)))
    stations = tuple(Station(f"st{i}", n, 0.0) for i, n in enumerate(nodes))
    config = LineConfig(tuple(segs), stations, min_headway=0.5)
    movers = [FleetMover(f"m{i}", rng.choice(nodes), round(rng.uniform(0, 2), 3)) for i in range(n_movers)]
    jobs = [
        Job(f"j{i}", rng.choice(stations).id, round(rng.uniform(0.5, 4), 3), round(rng.uniform(0, 8), 3))
        for i in range(n_jobs)
    ]
    return DispatchProblem.build(movers, jobs, config), config


def random_line(rng, n_movers=4, t_end=10.0, headway=0.5):
    """Random ring-with-chords line, movers spread along the ring, random goal script."""
    from maglev_conveyor.line import Command

    n_nodes = rng.randint(3, 6)
    nodes = [f"n{i}" for i in range(n_nodes)]
    segs = []
    for i in range(n_nodes):
        segs.append(TrackSegment(f"r{i}", nodes[i], nodes[(i + 1) % n_nodes],
                                 round(rng.uniform(2.0, 8.0), 3), round(rng.uniform(0.5, 3.0), 3),
                                 round(rng.uniform(0.5, 4.0), 3)))
    for k in range(rng.randint(0, 2)):
        a, b = rng.sample(nodes, 2)
        segs.append(TrackSegment(f"c{k}", a, b, round(rng.uniform(2.0, 8.0), 3),
                                 round(rng.uniform(0.5, 3.0), 3), round(rng.uniform(0.5, 4.0), 3)))
    stations = tuple(Station(f"st{i}", n, round(rng.uniform(0.0, 1.0), 3)) for i, n in enumerate(nodes))
    # place movers on ring segments, at least 2 headways apart along the ring
    ring = segs[:n_nodes]
    movers = []
    slots = []
    for s in ring:
        k = int(s.length // (2 * headway))
        slots.extend((s.id, round(j * 2 * headway, 6)) for j in range(1, k))
    for i, (sid, off) in enumerate(sorted(rng.sample(slots, n_movers))):
        home = next(s.from_node for s in ring if s.id == sid)
        movers.append(MoverSpec(f"m{i}", home, segment=sid, offset=off))
    config = LineConfig(tuple(segs), stations, tuple(movers), min_headway=headway, dt=1e-3)
    script = []
    for m in movers:
        for _ in range(rng.randint(1, 4)):
            script.append(Command(round(rng.uniform(0.0, 0.6 * t_end), 3), m.id, rng.choice(stations).id))
    script.sort(key=lambda c: (c.t, c.mover))
    return config, script


def min_same_segment_separation(run):
    """Smallest distance between two movers sharing a segment at any recorded tick."""
    import numpy as np

    ids = sorted(run.traces)
    worst = math.inf
    for i, a in enumerate(ids):
        ta = run.traces[a]
        seg_a = np.array(ta.segment)
        for b in ids[i + 1:]:
            tb = run.traces[b]
            same = seg_a == np.array(tb.segment)
            if same.any():
                worst = min(worst, float(np.min(np.abs(ta.offset[same] - tb.offset[same]))))
    return worst
