"""Synthetic city: network, ridership and a historical sighting log.

The historical controllers follow a rota with planted regularities that the
attack analysis should recover:

* hotspot stations are controlled every day at a fixed peak hour and collect
  ``concentration`` times the per-station sighting share of the others;
* the remaining stations are visited on a K-day rota, each at its own hour;
* weekend controls run two hours later than weekday ones;
* each station has its own probability of the check happening on board.

All randomness flows from ``SynthSpec.seed``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone

import numpy as np

from .errors import SpecInvalid
from .ingest import ControlSighting, SightingLog
from .network import (
    DAY_TYPES,
    Route,
    RidershipProfile,
    Station,
    TimeSlot,
    TransitNetwork,
    build_network,
    day_type_of,
)

CENTER = (46.5197, 6.6323)
DEFAULT_SIGHTINGS_PER_DAY = 14500 / 1460
HOTSPOT_FRACTION = 0.15
PEAK_HOURS = (8, 17, 12, 7, 18, 13, 9, 16)
WEEKEND_SHIFT_MIN = 120
SPEED_KMH = 24.0
RADIUS_KM = 2.5


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 7
    n_stations: int = 20
    n_routes: int = 5
    days: int = 1460
    concentration: float = 8.0
    sightings_per_day: float = DEFAULT_SIGHTINGS_PER_DAY
    start: date = date(2015, 1, 1)

    def validate(self) -> None:
        if self.n_stations < 4:
            raise SpecInvalid(f"n_stations must be >= 4, got {self.n_stations}")
        if self.n_routes < 1:
            raise SpecInvalid(f"n_routes must be >= 1, got {self.n_routes}")
        if self.days < 7:
            raise SpecInvalid(f"days must be >= 7, got {self.days}")
        if not self.concentration >= 1:
            raise SpecInvalid(f"concentration must be >= 1, got {self.concentration}")
        if not self.sightings_per_day > 0:
            raise SpecInvalid("sightings_per_day must be positive")


@dataclass(frozen=True)
class PlantedTruth:
    """Ground truth behind a synthetic sighting log."""

    hotspots: tuple[str, ...]
    peak_hour: dict[str, int] = field(hash=False)   # weekday control hour per station
    inside_bias: dict[str, float] = field(hash=False)
    cycle_days: int = 1


@dataclass(frozen=True, eq=False)
class SynthCity:
    network: TransitNetwork
    ridership: RidershipProfile
    sightings: SightingLog
    truth: PlantedTruth

    def __iter__(self):
        # unpacks as (network, ridership, sightings)
        return iter((self.network, self.ridership, self.sightings))


def synth_city(spec: SynthSpec) -> SynthCity:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    net, coords = _network(spec, rng)
    ridership = _ridership(net, rng)
    log, truth = _sightings(spec, net, coords, rng)
    return SynthCity(net, ridership, log, truth)


# --------------------------------------------------------------------------

def _km(a, b) -> float:
    (lat1, lon1), (lat2, lon2) = a, b
    dy = (lat2 - lat1) * 111.2
    dx = (lon2 - lon1) * 111.2 * math.cos(math.radians((lat1 + lat2) / 2))
    return math.hypot(dx, dy)


def _chain(ids, coords, start=None):
    """Nearest-neighbour ordering of ``ids`` beginning at ``start`` (or ids[0])."""
    rest = list(ids)
    cur = start if start is not None else rest.pop(0)
    if cur in rest:
        rest.remove(cur)
    out = [cur]
    while rest:
        nxt = min(rest, key=lambda s: (_km(coords[cur], coords[s]), s))
        rest.remove(nxt)
        out.append(nxt)
        cur = nxt
    return out


def _legs(stops, coords):
    return tuple(max(1, round(_km(coords[a], coords[b]) / SPEED_KMH * 60)) + 1
                 for a, b in zip(stops, stops[1:]))


def _network(spec: SynthSpec, rng) -> tuple[TransitNetwork, dict]:
    width = max(2, len(str(spec.n_stations)))
    ids = [f"S{i + 1:0{width}d}" for i in range(spec.n_stations)]
    radius = rng.uniform(0, 1, spec.n_stations) ** 0.5 * RADIUS_KM
    angle = rng.uniform(0, 2 * math.pi, spec.n_stations)
    coords, stations = {}, []
    for sid, r, a in zip(ids, radius, angle):
        lat = CENTER[0] + r * math.sin(a) / 111.2
        lon = CENTER[1] + r * math.cos(a) / (111.2 * math.cos(math.radians(CENTER[0])))
        lat, lon = round(lat, 6), round(lon, 6)
        coords[sid] = (lat, lon)
        zone = "Z11" if r < 1.0 else f"Z{12 + int(a // (math.pi / 2))}"
        stations.append(Station(sid, f"Station {sid[1:]}", lat, lon, zone))

    order = [ids[i] for i in rng.permutation(spec.n_stations)]
    n_split = min(spec.n_routes, spec.n_stations - 1)
    chunks = _split(order, n_split)
    routes, served = [], []
    for k, chunk in enumerate(chunks):
        if served:
            # transfer stop: the already-served station closest to this chunk
            hub = min(served, key=lambda s: (min(_km(coords[s], coords[c]) for c in chunk), s))
            stops = _chain([hub] + chunk, coords, start=hub)
        else:
            stops = _chain(chunk, coords)
        routes.append(Route(f"R{k + 1}", f"Line {k + 1}", tuple(stops), _legs(stops, coords)))
        served.extend(chunk)
    for k in range(n_split, spec.n_routes):
        pick = [ids[i] for i in rng.choice(spec.n_stations, size=min(3, spec.n_stations), replace=False)]
        stops = _chain(pick, coords)
        routes.append(Route(f"R{k + 1}", f"Line {k + 1}", tuple(stops), _legs(stops, coords)))
    return build_network(stations, routes), coords


def _split(seq, k):
    """Split a list into ``k`` contiguous parts whose sizes differ by at most one."""
    q, r = divmod(len(seq), k)
    out, i = [], 0
    for j in range(k):
        n = q + (j < r)
        out.append(list(seq[i:i + n]))
        i += n
    return out


def _bump(h, mu, sd):
    return math.exp(-0.5 * ((h - mu) / sd) ** 2)


def _ridership(net: TransitNetwork, rng) -> RidershipProfile:
    counts = {}
    for sid in net.ids:
        base = rng.lognormal(math.log(40), 0.7)
        morning = rng.uniform(0.2, 0.8)
        for slot_day in DAY_TYPES:
            for h in range(24):
                if h < 5:
                    level = 0.02
                elif slot_day == "WD":
                    level = (0.05 + 2.5 * morning * _bump(h, 8, 1.2)
                             + 2.5 * (1 - morning) * _bump(h, 17.5, 1.5) + 0.4 * _bump(h, 12.5, 2))
                else:
                    scale = 0.6 if slot_day == "SA" else 0.45
                    level = scale * (0.05 + 1.2 * _bump(h, 13, 3))
                n = int(rng.poisson(base * level))
                if n:
                    counts[(sid, TimeSlot(slot_day, h))] = n
    return RidershipProfile(counts)


def _split_reports(mu: float, rng) -> int:
    """Integer report count with mean ``mu`` and minimal variance."""
    lo = math.floor(mu)
    return lo + int(rng.random() < mu - lo)


def _sightings(spec: SynthSpec, net: TransitNetwork, coords, rng):
    ids = list(net.ids)
    n_hot = max(1, round(HOTSPOT_FRACTION * len(ids)))
    perm = [ids[i] for i in rng.permutation(len(ids))]
    hotspots, others = perm[:n_hot], perm[n_hot:]
    inside_bias = {sid: float(rng.uniform(0.05, 0.95)) for sid in ids}

    # per-day expected reports: hotspot mu_h, rota station mu_n once every K days,
    # with mu_h / (mu_n / K) == concentration
    weight = n_hot * spec.concentration + len(others)
    cycle = max(1, math.floor(weight / spec.sightings_per_day))
    mu_n = spec.sightings_per_day * cycle / weight
    mu_h = spec.concentration * mu_n / cycle

    peak = {}
    hot_hours = [PEAK_HOURS[i % len(PEAK_HOURS)] for i in range(n_hot)]
    for sid, h in zip(hotspots, hot_hours):
        peak[sid] = h
    free = [h for h in range(6, 22) if h not in hot_hours]
    rota = _split(others, cycle)
    for chunk in rota:
        for i, sid in enumerate(chunk):
            peak[sid] = free[(i * len(free)) // max(1, len(chunk))]

    sightings = []
    for d in range(spec.days):
        day = spec.start + timedelta(days=d)
        shift = 0 if day.weekday() < 5 else WEEKEND_SHIFT_MIN
        events = [(peak[s] * 60 + 20, s, mu_h) for s in hotspots]
        events += [(peak[s] * 60 + 20, s, mu_n) for s in rota[d % cycle]]
        events.sort(key=lambda e: (e[0], e[1]))
        cursor = 0
        midnight = datetime(day.year, day.month, day.day, tzinfo=timezone.utc)
        for t, sid, mu in events:
            t = max(t + shift, cursor)
            for _ in range(_split_reports(mu, rng)):
                minute = min(t + int(rng.integers(0, 3)), 24 * 60 - 1)
                lat = round(coords[sid][0] + rng.normal(0, 3e-4), 6)
                lon = round(coords[sid][1] + rng.normal(0, 3e-4), 6)
                inside = bool(rng.random() < inside_bias[sid])
                sightings.append(ControlSighting(midnight + timedelta(minutes=minute), sid, lat, lon,
                                                 inside))
                t += 4
            cursor = t + 1
    truth = PlantedTruth(tuple(sorted(hotspots)), peak, inside_bias, cycle)
    return SightingLog(tuple(sightings)), truth


def calendar_day_types(start: date, days: int) -> dict[str, int]:
    """Number of calendar days of each day type in ``[start, start + days)``."""
    out = {dt: 0 for dt in DAY_TYPES}
    for d in range(days):
        out[day_type_of((start + timedelta(days=d)).weekday())] += 1
    return out
