"""Track layout: directed segments between nodes, stations and mover placements.

Config objects do not raise on bad values; :func:`validate` reports every
problem as a diagnostic string so a scenario can be checked in one pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property


@dataclass(frozen=True)
class TrackSegment:
    id: str
    from_node: str
    to_node: str
    length: float
    v_limit: float
    a_limit: float


@dataclass(frozen=True)
class Station:
    id: str
    node: str
    process_time: float = 0.0
    name: str = ""


@dataclass(frozen=True)
class MoverSpec:
    """Initial placement of a mover.

    Without an explicit ``segment`` the mover parks at ``home``: at the end
    of the first incoming segment (by id), or the start of the first
    outgoing segment when the node has no incoming track.
    """

    id: str
    home: str
    mass: float = 1.0
    gap: float = 1e-3
    segment: str | None = None
    offset: float | None = None


@dataclass(frozen=True)
class LineConfig:
    segments: tuple[TrackSegment, ...]
    stations: tuple[Station, ...] = ()
    movers: tuple[MoverSpec, ...] = ()
    min_headway: float = 0.1
    dt: float = 1e-3

    @cached_property
    def segment_by_id(self) -> dict[str, TrackSegment]:
        return {s.id: s for s in self.segments}

    @cached_property
    def station_by_id(self) -> dict[str, Station]:
        return {s.id: s for s in self.stations}

    @cached_property
    def nodes(self) -> tuple[str, ...]:
        found = set()
        for s in self.segments:
            found.add(s.from_node)
            found.add(s.to_node)
        return tuple(sorted(found))

    @cached_property
    def out_segments(self) -> dict[str, tuple[TrackSegment, ...]]:
        out: dict[str, list[TrackSegment]] = {n: [] for n in self.nodes}
        for s in sorted(self.segments, key=lambda s: s.id):
            out[s.from_node].append(s)
        return {n: tuple(v) for n, v in out.items()}

    @cached_property
    def in_segments(self) -> dict[str, tuple[TrackSegment, ...]]:
        inc: dict[str, list[TrackSegment]] = {n: [] for n in self.nodes}
        for s in sorted(self.segments, key=lambda s: s.id):
            inc[s.to_node].append(s)
        return {n: tuple(v) for n, v in inc.items()}

    def resolve_target(self, target: str) -> tuple[str, Station | None]:
        """Map a station id or node id to (node, station or None)."""
        if target in self.station_by_id:
            st = self.station_by_id[target]
            return st.node, st
        if target in self.nodes:
            return target, None
        raise KeyError(target)

    def initial_placement(self, mover: MoverSpec) -> tuple[TrackSegment, float]:
        if mover.segment is not None:
            seg = self.segment_by_id[mover.segment]
            return seg, seg.length if mover.offset is None else float(mover.offset)
        incoming = self.in_segments.get(mover.home, ())
        if incoming:
            return incoming[0], incoming[0].length
        return self.out_segments[mover.home][0], 0.0


def track_distance(a: tuple[TrackSegment, float], b: tuple[TrackSegment, float]) -> float:
    """Along-track separation of two placements on the same or adjacent segments.

    Placements that share neither a segment nor an end node are reported as
    infinitely far apart.
    """
    (s1, o1), (s2, o2) = a, b
    best = math.inf
    if s1.id == s2.id:
        best = abs(o1 - o2)
    if s1.to_node == s2.from_node:
        best = min(best, (s1.length - o1) + o2)
    if s2.to_node == s1.from_node:
        best = min(best, (s2.length - o2) + o1)
    if s1.to_node == s2.to_node:
        best = min(best, (s1.length - o1) + (s2.length - o2))
    if s1.from_node == s2.from_node:
        best = min(best, o1 + o2)
    return best


def _positive(value) -> bool:
    return isinstance(value, (int, float)) and math.isfinite(value) and value > 0


def validate(config: LineConfig) -> list[str]:
    """Return one diagnostic per violated layout invariant (empty when valid)."""
    diags: list[str] = []
    if not _positive(config.min_headway):
        diags.append(f"min_headway must be positive, got {config.min_headway!r}")
    if not _positive(config.dt):
        diags.append(f"dt must be positive, got {config.dt!r}")
    if not config.segments:
        diags.append("track has no segments")

    for kind, items in (("segment", config.segments), ("station", config.stations), ("mover", config.movers)):
        seen = set()
        for item in items:
            if item.id in seen:
                diags.append(f"duplicate {kind} id {item.id!r}")
            seen.add(item.id)

    for s in config.segments:
        for name in ("length", "v_limit", "a_limit"):
            if not _positive(getattr(s, name)):
                diags.append(f"segment {s.id!r}: {name} must be positive, got {getattr(s, name)!r}")
        if s.from_node == s.to_node:
            diags.append(f"segment {s.id!r}: self-loop on node {s.from_node!r}")
        elif _positive(s.length) and _positive(config.min_headway) and s.length < config.min_headway:
            diags.append(
                f"segment {s.id!r}: length {s.length} is shorter than min_headway {config.min_headway}"
            )

    # weak connectivity
    nodes = config.nodes
    if nodes:
        adj: dict[str, set[str]] = {n: set() for n in nodes}
        for s in config.segments:
            adj[s.from_node].add(s.to_node)
            adj[s.to_node].add(s.from_node)
        seen = {nodes[0]}
        stack = [nodes[0]]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if len(seen) != len(nodes):
            missing = sorted(set(nodes) - seen)
            diags.append(f"track is not connected; unreachable nodes {missing}")

    for st in config.stations:
        if st.node not in nodes:
            diags.append(f"station {st.id!r} references missing node {st.node!r}")
        if not (isinstance(st.process_time, (int, float)) and st.process_time >= 0):
            diags.append(f"station {st.id!r}: process_time must be non-negative")

    placements = []
    for m in config.movers:
        if m.home not in nodes:
            diags.append(f"mover {m.id!r} home node {m.home!r} does not exist")
            continue
        if not _positive(m.mass):
            diags.append(f"mover {m.id!r}: mass must be positive")
        if not _positive(m.gap):
            diags.append(f"mover {m.id!r}: gap must be positive")
        if m.segment is not None:
            seg = config.segment_by_id.get(m.segment)
            if seg is None:
                diags.append(f"mover {m.id!r} references missing segment {m.segment!r}")
                continue
            off = seg.length if m.offset is None else m.offset
            if not (0 <= off <= seg.length):
                diags.append(f"mover {m.id!r}: offset {off} outside segment {seg.id!r}")
                continue
        placements.append((m.id, config.initial_placement(m)))

    if _positive(config.min_headway):
        for i, (id_a, pa) in enumerate(placements):
            for id_b, pb in placements[i + 1 :]:
                sep = track_distance(pa, pb)
                if sep < config.min_headway:
                    diags.append(
                        f"movers {id_a!r} and {id_b!r} start {sep:g} m apart, below min_headway {config.min_headway:g}"
                    )
    return diags
