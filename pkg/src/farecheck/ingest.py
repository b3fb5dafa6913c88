"""File formats: network.json, sightings.csv, ridership.csv, traces.jsonl.

Timestamps in files are ISO-8601 UTC; naive timestamps are taken as UTC.
CSV row numbers in errors are physical line numbers (the header is row 1).
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from collections.abc import Iterable
from dataclasses import dataclass
from datetime import date, datetime, timezone
from functools import cached_property
from typing import IO

from .errors import EmptyLog, NegativeCount, ParseError
from .network import (
    DAY_TYPES,
    ControlTrace,
    Route,
    RidershipProfile,
    Station,
    TimeSlot,
    TransitNetwork,
    Visit,
    build_network,
)

SIGHTINGS_HEADER = ["timestamp", "station_id", "lat", "lon", "inside_vehicle"]
RIDERSHIP_HEADER = ["station_id", "day_type", "hour", "boardings"]


@dataclass(frozen=True)
class ControlSighting:
    timestamp: datetime
    station_id: str
    lat: float
    lon: float
    inside_vehicle: bool


@dataclass(frozen=True)
class SightingLog:
    """Chronologically sorted controller sightings."""

    sightings: tuple[ControlSighting, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "sightings", tuple(sorted(self.sightings, key=lambda s: s.timestamp))
        )

    def __len__(self) -> int:
        return len(self.sightings)

    def __iter__(self):
        return iter(self.sightings)

    @property
    def start(self) -> datetime:
        if not self.sightings:
            raise EmptyLog("log is empty")
        return self.sightings[0].timestamp

    @property
    def end(self) -> datetime:
        if not self.sightings:
            raise EmptyLog("log is empty")
        return self.sightings[-1].timestamp

    def minutes(self) -> list[float]:
        """Sighting times as minutes since the first sighting."""
        t0 = self.start
        return [(s.timestamp - t0).total_seconds() / 60.0 for s in self.sightings]

    @cached_property
    def by_day(self) -> dict[date, list[ControlSighting]]:
        days: dict[date, list[ControlSighting]] = defaultdict(list)
        for s in self.sightings:
            days[s.timestamp.date()].append(s)
        return dict(days)

    def daily_sequences(self) -> list[list[str]]:
        """Station-id sequences, one per calendar day, in chronological order."""
        return [[s.station_id for s in day] for _, day in sorted(self.by_day.items())]

    def split_days(self, fraction: float) -> tuple[SightingLog, SightingLog]:
        """Chronological split by calendar day: first ``fraction`` of days vs the rest."""
        days = sorted(self.by_day)
        cut = int(round(len(days) * fraction))
        head = [s for d in days[:cut] for s in self.by_day[d]]
        tail = [s for d in days[cut:] for s in self.by_day[d]]
        return SightingLog(tuple(head)), SightingLog(tuple(tail))


# --------------------------------------------------------------------------
# network.json
# --------------------------------------------------------------------------

def network_to_dict(net: TransitNetwork) -> dict:
    stations = []
    for s in net.stations:
        d = {"id": s.id, "name": s.name, "lat": s.lat, "lon": s.lon}
        if s.zone is not None:
            d["zone"] = s.zone
        d["dwell_min"] = s.dwell_min
        stations.append(d)
    routes = [
        {"id": r.id, "name": r.name, "stops": list(r.stops), "leg_minutes": list(r.leg_minutes)}
        for r in net.routes
    ]
    return {"stations": stations, "routes": routes}


def network_from_dict(doc) -> TransitNetwork:
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    for key in ("stations", "routes"):
        if not isinstance(doc.get(key), list):
            raise ParseError(f"missing or non-list {key!r}", field=key)

    stations = []
    for n, d in enumerate(doc["stations"]):
        ctx = f"stations[{n}]"
        try:
            stations.append(Station(
                id=str(_req(d, "id", ctx)),
                name=str(d.get("name", d.get("id"))),
                lat=float(_req(d, "lat", ctx)),
                lon=float(_req(d, "lon", ctx)),
                zone=d.get("zone"),
                dwell_min=_num(d.get("dwell_min", 10)),
            ))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{ctx}: {exc}", field=ctx) from None

    routes = []
    for n, d in enumerate(doc["routes"]):
        ctx = f"routes[{n}]"
        rid = d.get("id") if isinstance(d, dict) else None
        try:
            stops = _req(d, "stops", ctx)
            legs = _req(d, "leg_minutes", ctx)
            if not isinstance(stops, list) or not isinstance(legs, list):
                raise ValueError("stops and leg_minutes must be lists")
            routes.append(Route(
                id=str(_req(d, "id", ctx)),
                name=str(d.get("name", rid)),
                stops=tuple(str(s) for s in stops),
                leg_minutes=tuple(_num(m) for m in legs),
            ))
        except (TypeError, ValueError) as exc:
            label = f"route {rid!r}" if rid is not None else ctx
            raise ParseError(f"{label}: {exc}", field=ctx) from None

    if not stations or not routes:
        raise ParseError("network needs at least one station and one route")
    return build_network(stations, routes)


def _req(d, key, ctx):
    if not isinstance(d, dict):
        raise ParseError(f"{ctx} must be an object", field=ctx)
    if key not in d:
        raise ParseError(f"{ctx}: missing {key!r}", field=f"{ctx}.{key}")
    return d[key]


def _num(x):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValueError(f"expected a number, got {x!r}")
    return x


def parse_network(stream: IO[str]) -> TransitNetwork:
    try:
        doc = json.load(stream)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    return network_from_dict(doc)


def write_network(net: TransitNetwork, stream: IO[str]) -> None:
    json.dump(network_to_dict(net), stream, indent=2)
    stream.write("\n")


# --------------------------------------------------------------------------
# sightings.csv
# --------------------------------------------------------------------------

def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


_BOOLS = {"1": True, "true": True, "0": False, "false": False}


def parse_sightings(stream: IO[str]) -> SightingLog:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise EmptyLog("sightings file is empty")
    if [h.strip() for h in header] != SIGHTINGS_HEADER:
        raise ParseError(f"expected header {','.join(SIGHTINGS_HEADER)}", row=1)

    out = []
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(SIGHTINGS_HEADER):
            raise ParseError(f"expected {len(SIGHTINGS_HEADER)} columns, got {len(row)}", row=row_no)
        ts, sid, lat, lon, inside = (c.strip() for c in row)
        try:
            stamp = parse_timestamp(ts)
        except ValueError:
            raise ParseError(f"bad timestamp {ts!r}", row=row_no, field="timestamp") from None
        if not sid:
            raise ParseError("empty station_id", row=row_no, field="station_id")
        try:
            lat_f, lon_f = float(lat), float(lon)
        except ValueError:
            raise ParseError("bad coordinate", row=row_no, field="lat/lon") from None
        if not (-90 <= lat_f <= 90 and -180 <= lon_f <= 180):
            raise ParseError("coordinate out of range", row=row_no, field="lat/lon")
        flag = _BOOLS.get(inside.lower())
        if flag is None:
            raise ParseError(f"inside_vehicle must be 0/1/true/false, got {inside!r}",
                             row=row_no, field="inside_vehicle")
        out.append(ControlSighting(stamp, sid, lat_f, lon_f, flag))
    if not out:
        raise EmptyLog("sightings file has no data rows")
    return SightingLog(tuple(out))


def write_sightings(log: Iterable[ControlSighting], stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(SIGHTINGS_HEADER)
    for s in log:
        w.writerow([format_timestamp(s.timestamp), s.station_id, f"{s.lat:.6f}", f"{s.lon:.6f}",
                    int(s.inside_vehicle)])


# --------------------------------------------------------------------------
# ridership.csv
# --------------------------------------------------------------------------

def parse_ridership(stream: IO[str]) -> RidershipProfile:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != RIDERSHIP_HEADER:
        raise ParseError(f"expected header {','.join(RIDERSHIP_HEADER)}", row=1)
    counts: dict[tuple[str, TimeSlot], float] = defaultdict(float)
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(RIDERSHIP_HEADER):
            raise ParseError(f"expected {len(RIDERSHIP_HEADER)} columns, got {len(row)}", row=row_no)
        sid, day_type, hour, boardings = (c.strip() for c in row)
        if not sid:
            raise ParseError("empty station_id", row=row_no, field="station_id")
        if day_type not in DAY_TYPES:
            raise ParseError(f"day_type must be one of {DAY_TYPES}", row=row_no, field="day_type")
        try:
            h = int(hour)
        except ValueError:
            raise ParseError(f"bad hour {hour!r}", row=row_no, field="hour") from None
        if not 0 <= h <= 23:
            raise ParseError(f"hour {h} outside 0..23", row=row_no, field="hour")
        try:
            b = float(boardings)
        except ValueError:
            raise ParseError(f"bad boardings {boardings!r}", row=row_no, field="boardings") from None
        if b < 0:
            raise NegativeCount(f"negative boardings {b}", row=row_no, field="boardings")
        counts[(sid, TimeSlot(day_type, h))] += b
    return RidershipProfile(dict(counts))


def write_ridership(profile: RidershipProfile, stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(RIDERSHIP_HEADER)
    for (sid, slot), v in sorted(profile.counts.items(), key=lambda kv: (kv[0][0], kv[0][1].index)):
        w.writerow([sid, slot.day_type, slot.hour, _fmt_count(v)])


def _fmt_count(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


# --------------------------------------------------------------------------
# traces.jsonl
# --------------------------------------------------------------------------

def trace_to_dict(t: ControlTrace) -> dict:
    return {
        "controller_id": t.controller_id,
        "visits": [
            {"station_id": v.station_id, "day_type": v.slot.day_type, "hour": v.slot.hour,
             "arrive_min": v.arrive_min, "depart_min": v.depart_min}
            for v in t.visits
        ],
        "cost_min": t.cost_min,
        "quality": t.quality,
    }


def trace_from_dict(d) -> ControlTrace:
    if not isinstance(d, dict):
        raise ValueError("trace must be an object")
    for key in ("controller_id", "visits", "cost_min", "quality"):
        if key not in d:
            raise ValueError(f"missing {key!r}")
    if not isinstance(d["visits"], list):
        raise ValueError("'visits' must be a list")
    visits = []
    for v in d["visits"]:
        visits.append(Visit(
            station_id=str(v["station_id"]),
            slot=TimeSlot(v["day_type"], int(v["hour"])),
            arrive_min=float(v["arrive_min"]),
            depart_min=float(v["depart_min"]),
        ))
    return ControlTrace(str(d["controller_id"]), tuple(visits), float(d["cost_min"]),
                        float(d["quality"]))


def write_traces(traces: Iterable[ControlTrace], stream: IO[str]) -> None:
    for t in traces:
        stream.write(json.dumps(trace_to_dict(t), separators=(",", ":")))
        stream.write("\n")


def read_traces(stream: IO[str]) -> list[ControlTrace]:
    out = []
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            out.append(trace_from_dict(json.loads(line)))
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=line_no) from None
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(str(exc), line=line_no) from None
    return out
