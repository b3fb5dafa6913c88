"""Transit network model: bipartite station/route graph with ridership overlay.

Stations and routes are both graph nodes; an edge joins a route to every
station it serves. Shortest paths are computed on the derived station graph
(two stations adjacent iff consecutive on some route, weight = leg minutes),
and route changes are free.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import Disconnected, DuplicateId, InfeasibleLeg, UnknownStation

DAY_TYPES = ("WD", "SA", "SU")
N_SLOTS = len(DAY_TYPES) * 24
DEFAULT_DWELL_MIN = 10


@dataclass(frozen=True)
class TimeSlot:
    """One of the 72 (day type, hour) buckets."""

    day_type: str
    hour: int

    def __post_init__(self):
        if self.day_type not in DAY_TYPES:
            raise ValueError(f"day_type must be one of {DAY_TYPES}, got {self.day_type!r}")
        if not (isinstance(self.hour, (int, np.integer)) and 0 <= self.hour <= 23):
            raise ValueError(f"hour must be an integer in 0..23, got {self.hour!r}")

    @property
    def index(self) -> int:
        return DAY_TYPES.index(self.day_type) * 24 + int(self.hour)

    @classmethod
    def from_index(cls, i: int) -> TimeSlot:
        return cls(DAY_TYPES[i // 24], i % 24)

    @classmethod
    def at(cls, day_type: str, minute: float) -> TimeSlot:
        """Slot containing ``minute`` (minutes since midnight) on a day of ``day_type``."""
        return cls(day_type, int(minute // 60) % 24)

    def __str__(self) -> str:
        return f"{self.day_type} {self.hour:02d}:00"


ALL_SLOTS = tuple(TimeSlot.from_index(i) for i in range(N_SLOTS))


def day_type_of(weekday: int) -> str:
    """Map ``date.weekday()`` (Mon=0) to a day type."""
    return "WD" if weekday < 5 else ("SA" if weekday == 5 else "SU")


@dataclass(frozen=True)
class Station:
    id: str
    name: str
    lat: float
    lon: float
    zone: str | None = None
    dwell_min: float = DEFAULT_DWELL_MIN

    def __post_init__(self):
        if self.dwell_min < 1:
            raise ValueError(f"station {self.id}: dwell_min must be >= 1")
        if not (-90 <= self.lat <= 90 and -180 <= self.lon <= 180):
            raise ValueError(f"station {self.id}: coordinates out of range")


@dataclass(frozen=True)
class Route:
    id: str
    name: str
    stops: tuple[str, ...]
    leg_minutes: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "stops", tuple(self.stops))
        object.__setattr__(self, "leg_minutes", tuple(self.leg_minutes))
        if len(self.stops) < 2:
            raise ValueError(f"route {self.id}: needs at least 2 stops")
        if len(self.leg_minutes) != len(self.stops) - 1:
            raise ValueError(
                f"route {self.id}: {len(self.leg_minutes)} legs for {len(self.stops)} stops"
            )
        if any(not (leg > 0) for leg in self.leg_minutes):
            raise ValueError(f"route {self.id}: every leg must be positive")


@dataclass(frozen=True)
class TransitNetwork:
    """Validated network. Build with :func:`build_network`.

    Station order everywhere (index arrays, matrices, reports) is the
    lexicographic order of station ids.
    """

    stations: tuple[Station, ...]
    routes: tuple[Route, ...]

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(sorted(s.id for s in self.stations))

    @cached_property
    def index(self) -> dict[str, int]:
        return {sid: i for i, sid in enumerate(self.ids)}

    @cached_property
    def by_id(self) -> dict[str, Station]:
        return {s.id: s for s in self.stations}

    @cached_property
    def dwell(self) -> np.ndarray:
        return np.array([self.by_id[sid].dwell_min for sid in self.ids], dtype=float)

    @cached_property
    def adjacency(self) -> frozenset[tuple[str, str]]:
        """Bipartite edge set as (station id, route id) pairs."""
        return frozenset((sid, r.id) for r in self.routes for sid in r.stops)

    def degree(self, station_id: str) -> int:
        """Number of routes serving a station (its bipartite degree)."""
        self.require(station_id)
        return sum(1 for r in self.routes if station_id in r.stops)

    @cached_property
    def leg_matrix(self) -> np.ndarray:
        """Direct leg minutes between consecutive stops (inf where not adjacent)."""
        n = len(self.ids)
        legs = np.full((n, n), np.inf)
        for r in self.routes:
            for a, b, m in zip(r.stops, r.stops[1:], r.leg_minutes):
                i, j = self.index[a], self.index[b]
                if i != j and m < legs[i, j]:
                    legs[i, j] = legs[j, i] = m
        return legs

    @cached_property
    def distance(self) -> np.ndarray:
        """All-pairs shortest travel minutes on the station graph."""
        legs = self.leg_matrix
        weights = np.where(np.isfinite(legs), legs, 0.0)
        return dijkstra(csr_matrix(weights), directed=False)

    def require(self, station_id: str) -> int:
        try:
            return self.index[station_id]
        except KeyError:
            raise UnknownStation(f"unknown station {station_id!r}") from None

    def __len__(self) -> int:
        return len(self.stations)


def build_network(stations: Iterable[Station], routes: Iterable[Route]) -> TransitNetwork:
    stations = tuple(stations)
    routes = tuple(routes)
    if not stations or not routes:
        raise ValueError("network needs at least one station and one route")

    seen: set[str] = set()
    for s in stations:
        if s.id in seen:
            raise DuplicateId(f"duplicate station id {s.id!r}")
        seen.add(s.id)
    route_ids: set[str] = set()
    for r in routes:
        if r.id in route_ids:
            raise DuplicateId(f"duplicate route id {r.id!r}")
        if r.id in seen:
            raise DuplicateId(f"route id {r.id!r} collides with a station id")
        route_ids.add(r.id)
        for sid in r.stops:
            if sid not in seen:
                raise UnknownStation(f"route {r.id!r} references unknown station {sid!r}")

    served = {sid for r in routes for sid in r.stops}
    orphans = sorted(seen - served)
    if orphans:
        raise Disconnected(f"stations not served by any route: {orphans}")

    net = TransitNetwork(stations, routes)
    legs = net.leg_matrix
    n_comp, _ = connected_components(csr_matrix(np.isfinite(legs).astype(np.int8)), directed=False)
    if n_comp > 1:
        raise Disconnected(f"station graph has {n_comp} components")
    return net


def travel_cost(net: TransitNetwork, p: str, q: str) -> float:
    """Minimum leg minutes between two stations."""
    return float(net.distance[net.require(p), net.require(q)])


# --------------------------------------------------------------------------
# ridership overlay
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RidershipProfile:
    """Boardings per hour keyed by (station id, slot). Missing keys read as 0."""

    counts: Mapping[tuple[str, TimeSlot], float] = field(default_factory=dict)

    def __post_init__(self):
        for (sid, slot), v in self.counts.items():
            if v < 0:
                raise ValueError(f"negative boardings at {sid} {slot}")

    def get(self, station_id: str, slot: TimeSlot) -> float:
        return float(self.counts.get((station_id, slot), 0.0))

    def __eq__(self, other) -> bool:
        if not isinstance(other, RidershipProfile):
            return NotImplemented
        nz = lambda c: {k: float(v) for k, v in c.items() if v}  # noqa: E731
        return nz(self.counts) == nz(other.counts)


@dataclass(frozen=True, eq=False)
class TimeVaryingNetwork:
    network: TransitNetwork
    ridership: RidershipProfile

    def __post_init__(self):
        for sid, _ in self.ridership.counts:
            self.network.require(sid)

    @cached_property
    def boardings(self) -> np.ndarray:
        """(stations x 72 slots) matrix of boardings."""
        m = np.zeros((len(self.network.ids), N_SLOTS))
        for (sid, slot), v in self.ridership.counts.items():
            m[self.network.index[sid], slot.index] += v
        return m


def quality_of_visit(tvn: TimeVaryingNetwork, station_id: str, slot: TimeSlot) -> float:
    tvn.network.require(station_id)
    return tvn.ridership.get(station_id, slot)


# --------------------------------------------------------------------------
# traces
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Visit:
    station_id: str
    slot: TimeSlot
    arrive_min: float
    depart_min: float


@dataclass(frozen=True)
class ControlTrace:
    controller_id: str
    visits: tuple[Visit, ...]
    cost_min: float
    quality: float

    @property
    def stations(self) -> tuple[str, ...]:
        return tuple(v.station_id for v in self.visits)

    @property
    def day_type(self) -> str | None:
        return self.visits[0].slot.day_type if self.visits else None


def _as_net(obj) -> TransitNetwork:
    return obj.network if isinstance(obj, TimeVaryingNetwork) else obj


def _station_ids(visits) -> list[str]:
    return [v if isinstance(v, str) else v.station_id for v in visits]


def trace_cost(tvn, visits: Sequence[Visit] | Sequence[str]) -> float:
    """Total dwell plus travel minutes. Accepts visits or bare station ids."""
    net = _as_net(tvn)
    idx = [net.require(s) for s in _station_ids(visits)]
    # accumulation order (leg, then dwell, visit by visit) is shared with the
    # samplers' budget masks so a stored cost always recomputes bit-identically
    total = 0.0
    prev = None
    for i in idx:
        if prev is not None:
            leg = net.distance[prev, i]
            if not math.isfinite(leg):
                raise InfeasibleLeg(f"no path from {net.ids[prev]} to {net.ids[i]}")
            total += float(leg)
        total += float(net.dwell[i])
        prev = i
    return total


def trace_quality(tvn: TimeVaryingNetwork, visits: Sequence[Visit]) -> float:
    """Boardings summed over the distinct (station, slot) pairs visited."""
    trace_cost(tvn, visits)  # feasibility
    seen = {(v.station_id, v.slot) for v in visits}
    # sorted so float summation order is reproducible
    return float(sum(tvn.ridership.get(s, slot) for s, slot in sorted(seen, key=_key)))


def _key(item):
    s, slot = item
    return s, slot.index


def layout_visits(net, stations: Sequence[str], start_min: float, day_type: str) -> tuple[Visit, ...]:
    """Assign arrival/departure times to a station sequence starting at ``start_min``."""
    net = _as_net(net)
    visits = []
    t = float(start_min)
    prev = None
    for sid in stations:
        i = net.require(sid)
        if prev is not None:
            leg = net.distance[prev, i]
            if not math.isfinite(leg):
                raise InfeasibleLeg(f"no path from {net.ids[prev]} to {sid}")
            t += float(leg)
        dwell = float(net.dwell[i])
        visits.append(Visit(sid, TimeSlot.at(day_type, t), t, t + dwell))
        t += dwell
        prev = i
    return tuple(visits)


def make_trace(tvn: TimeVaryingNetwork, controller_id: str, stations: Sequence[str],
               start_min: float, day_type: str) -> ControlTrace:
    visits = layout_visits(tvn.network, stations, start_min, day_type)
    return ControlTrace(controller_id, visits, trace_cost(tvn, visits), trace_quality(tvn, visits))


def check_trace(tvn, trace: ControlTrace, budget: float | None = None) -> list[str]:
    """Return a list of invariant violations (empty when the trace is valid)."""
    net = _as_net(tvn)
    problems = []
    prev = None
    for n, v in enumerate(trace.visits):
        if v.station_id not in net.index:
            problems.append(f"visit {n}: unknown station {v.station_id}")
            return problems
        i = net.index[v.station_id]
        if v.depart_min - v.arrive_min != net.dwell[i]:
            problems.append(f"visit {n}: dwell mismatch")
        if prev is not None:
            pv, pi = prev
            if not v.arrive_min > pv.arrive_min:
                problems.append(f"visit {n}: arrival not after previous")
            leg = net.distance[pi, i]
            if not math.isfinite(leg):
                problems.append(f"visit {n}: no path from previous station")
            elif v.arrive_min != pv.depart_min + leg:
                problems.append(f"visit {n}: arrival inconsistent with travel time")
        if v.slot != TimeSlot.at(v.slot.day_type, v.arrive_min):
            problems.append(f"visit {n}: slot does not match arrival time")
        prev = (v, i)
    if not problems:
        cost = trace_cost(net, trace.visits)
        if cost != trace.cost_min:
            problems.append(f"stored cost {trace.cost_min} != recomputed {cost}")
        if budget is not None and cost > budget:
            problems.append(f"cost {cost} exceeds budget {budget}")
    return problems
