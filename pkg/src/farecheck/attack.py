"""Attack-vector analysis of a controller sighting log.

Covers inspection statistics (station shares, per-slot presence, the
station x hour heatmap, on-board rate), Markov predictability of controller
movement, and the three rider-side attacks: selective ticket purchase,
risk-minimising re-routing and forecasting of upcoming control locations.
"""

from __future__ import annotations

import heapq
import math
from collections import Counter, defaultdict
from collections.abc import Sequence
from dataclasses import dataclass, field
from datetime import timedelta

import numpy as np

from .errors import EmptyLog, InsufficientData, NoPath, UnknownStation
from .ingest import SightingLog
from .network import ALL_SLOTS, DAY_TYPES, N_SLOTS, TimeSlot, TransitNetwork, day_type_of


# --------------------------------------------------------------------------
# inspection statistics
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InspectionStats:
    """Per-station inspection statistics; arrays are indexed like ``station_ids``."""

    station_ids: tuple[str, ...]
    counts: np.ndarray          # (S,) sightings per station
    presence: np.ndarray        # (S, 72) fraction of observed days with a sighting in the slot
    heatmap: np.ndarray         # (S, 24) sightings per hour of day
    inside_rate: np.ndarray     # (S,) on-board fraction; 0 where never sighted
    days_observed: dict[str, int] = field(default_factory=dict)

    @property
    def station_share(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    def index(self, station_id: str) -> int:
        try:
            return self.station_ids.index(station_id)
        except ValueError:
            raise UnknownStation(f"unknown station {station_id!r}") from None

    def share(self, station_id: str) -> float:
        return float(self.station_share[self.index(station_id)])

    def presence_prob(self, station_id: str, slot: TimeSlot) -> float:
        return float(self.presence[self.index(station_id), slot.index])

    def zone_share(self, net: TransitNetwork) -> dict[str, float]:
        """Station shares re-aggregated by zone label (unlabelled stations -> "")."""
        out: dict[str, float] = defaultdict(float)
        for sid, v in zip(self.station_ids, self.station_share):
            out[net.by_id[sid].zone or ""] += float(v)
        return dict(sorted(out.items()))

    def to_json(self) -> dict:
        share = self.station_share
        return {
            "station_share": {s: float(v) for s, v in zip(self.station_ids, share)},
            "presence_prob": {
                s: {str(slot): float(self.presence[i, slot.index])
                    for slot in ALL_SLOTS if self.presence[i, slot.index] > 0}
                for i, s in enumerate(self.station_ids)
            },
            "heatmap": {s: [int(x) for x in self.heatmap[i]] for i, s in enumerate(self.station_ids)},
            "inside_rate": {s: float(v) for s, v in zip(self.station_ids, self.inside_rate)},
        }


def inspection_stats(log: SightingLog, net: TransitNetwork) -> InspectionStats:
    if len(log) == 0:
        raise EmptyLog("cannot analyse an empty log")
    ids = net.ids
    n = len(ids)
    counts = np.zeros(n)
    heat = np.zeros((n, 24), dtype=np.int64)
    inside = np.zeros(n)
    present: set[tuple[int, object, int]] = set()

    for s in log:
        i = net.require(s.station_id)
        ts = s.timestamp
        counts[i] += 1
        heat[i, ts.hour] += 1
        inside[i] += s.inside_vehicle
        slot = TimeSlot(day_type_of(ts.weekday()), ts.hour)
        present.add((i, ts.date(), slot.index))

    first, last = log.start.date(), log.end.date()
    days = {dt: 0 for dt in DAY_TYPES}
    for d in range((last - first).days + 1):
        days[day_type_of((first + timedelta(days=d)).weekday())] += 1

    presence = np.zeros((n, N_SLOTS))
    for i, _, j in present:
        presence[i, j] += 1
    for j in range(N_SLOTS):
        nd = days[DAY_TYPES[j // 24]]
        presence[:, j] = presence[:, j] / nd if nd else 0.0

    with np.errstate(invalid="ignore", divide="ignore"):
        rate = np.where(counts > 0, inside / np.maximum(counts, 1), 0.0)
    return InspectionStats(ids, counts, presence, heat, rate, days)


# --------------------------------------------------------------------------
# Markov predictability
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MarkovModel:
    order: int
    table: dict[tuple[str, ...], dict[str, float]]
    history_counts: dict[tuple[str, ...], int]
    marginal: dict[str, float]

    def predict(self, history: Sequence[str]) -> tuple[str, bool]:
        """Most likely next station and whether the marginal fallback was used."""
        key = tuple(history[len(history) - self.order:]) if self.order else ()
        row = self.table.get(key)
        if row is None:
            return _argmax(self.marginal), True
        return _argmax(row), False

    def entropy_bits(self) -> float:
        total = sum(self.history_counts.values())
        h = 0.0
        for key, row in self.table.items():
            w = self.history_counts[key] / total
            h -= w * sum(p * math.log2(p) for p in row.values() if p > 0)
        return h + 0.0  # normalise -0.0


def _argmax(dist: dict[str, float]) -> str:
    # highest probability, ties to the lexicographically smallest id
    return min(dist.items(), key=lambda kv: (-kv[1], kv[0]))[0]


def _sequences(data) -> list[list[str]]:
    if isinstance(data, SightingLog):
        return data.daily_sequences()
    return [list(seq) for seq in data]


def _transitions(seqs, k):
    for seq in seqs:
        for i in range(k, len(seq)):
            yield tuple(seq[i - k:i]), seq[i]


def fit_markov(data, k: int = 1) -> MarkovModel:
    """Maximum-likelihood order-``k`` chain over within-day consecutive sightings.

    ``data`` is a :class:`SightingLog` (split by calendar day) or any iterable
    of station-id sequences, each of which resets the history.
    """
    if k < 0:
        raise ValueError("order must be >= 0")
    seqs = _sequences(data)
    if sum(len(s) for s in seqs) <= k:
        raise InsufficientData(f"need more than {k} sightings for an order-{k} model")
    counts: dict[tuple[str, ...], Counter] = defaultdict(Counter)
    nxt = Counter()
    for hist, s in _transitions(seqs, k):
        counts[hist][s] += 1
        nxt[s] += 1
    if not nxt:
        raise InsufficientData(f"no within-day transitions of order {k}")
    table = {}
    hist_n = {}
    for hist, c in counts.items():
        tot = sum(c.values())
        table[hist] = {s: v / tot for s, v in sorted(c.items())}
        hist_n[hist] = tot
    tot = sum(nxt.values())
    marginal = {s: v / tot for s, v in sorted(nxt.items())}
    return MarkovModel(k, table, hist_n, marginal)


@dataclass(frozen=True)
class Predictability:
    accuracy: float
    entropy_bits: float
    n_transitions: int


def predictability(model: MarkovModel, holdout) -> Predictability:
    seqs = _sequences(holdout)
    hits = total = 0
    for hist, s in _transitions(seqs, model.order):
        guess, _ = model.predict(hist)
        hits += guess == s
        total += 1
    if total == 0:
        raise InsufficientData("holdout has no transitions to score")
    return Predictability(hits / total, model.entropy_bits(), total)


# --------------------------------------------------------------------------
# rider attacks
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AttackScenario:
    p_ins: float
    fine: float
    ticket: float

    def __post_init__(self):
        if not 0.0 <= self.p_ins <= 1.0:
            raise ValueError("p_ins must lie in [0, 1]")
        if self.fine < 0 or self.ticket < 0:
            raise ValueError("fine and ticket price must be non-negative")


@dataclass(frozen=True)
class PurchaseDecision:
    decision: str            # "Purchase" or "Evade"
    evasion_payoff: float


def selective_purchase(sc: AttackScenario) -> PurchaseDecision:
    expected_fine = sc.p_ins * sc.fine
    decision = "Purchase" if expected_fine >= sc.ticket else "Evade"
    return PurchaseDecision(decision, sc.ticket - expected_fine)


def ride_risk(presence: Sequence[float]) -> float:
    """Probability that a ride through stations with these presence probabilities meets a control."""
    survive = 1.0
    for p in presence:
        survive *= 1.0 - p
    return 1.0 - survive


@dataclass(frozen=True)
class RiderPath:
    stations: tuple[str, ...]
    risk: float
    travel_min: float


def min_inspection_path(net: TransitNetwork, stats: InspectionStats, origin: str, dest: str,
                        slot: TimeSlot) -> RiderPath:
    """Path maximising the chance of passing no control; ties go to the quicker path."""
    o, d = net.require(origin), net.require(dest)
    p = np.array([stats.presence_prob(sid, slot) for sid in net.ids])
    if o == d:
        return RiderPath((), float(p[o]), 0.0)

    # lexicographic cost: (#certain-control stations, -log survival, minutes)
    def weight(i):
        return (1, 0.0) if p[i] >= 1.0 else (0, -math.log1p(-p[i]))

    legs = net.leg_matrix
    w0 = weight(o)
    best = {o: (w0[0], w0[1], 0.0)}
    prev: dict[int, int] = {}
    heap = [(w0[0], w0[1], 0.0, o)]
    done = set()
    while heap:
        c, r, t, i = heapq.heappop(heap)
        if i in done:
            continue
        done.add(i)
        if i == d:
            break
        for j in np.flatnonzero(np.isfinite(legs[i])):
            j = int(j)
            if j in done:
                continue
            wj = weight(j)
            cand = (c + wj[0], r + wj[1], t + float(legs[i, j]))
            if j not in best or cand < best[j]:
                best[j] = cand
                prev[j] = i
                heapq.heappush(heap, (*cand, j))
    if d not in best:
        raise NoPath(f"no path from {origin} to {dest}")
    path = [d]
    while path[-1] != o:
        path.append(prev[path[-1]])
    path.reverse()
    stations = tuple(net.ids[i] for i in path)
    return RiderPath(stations, ride_risk(p[path]), best[d][2])


@dataclass(frozen=True)
class Forecast:
    stations: tuple[str, ...]
    unseen_history: bool     # True when some step fell back to the marginal distribution


def forecast_controls(model: MarkovModel, recent: Sequence[str], horizon: int) -> Forecast:
    """Greedy most-likely rollout of the next ``horizon`` control locations."""
    if len(recent) < model.order:
        raise InsufficientData(f"need at least {model.order} recent sightings")
    hist = list(recent)
    out = []
    fell_back = False
    for _ in range(horizon):
        nxt, fb = model.predict(hist)
        fell_back |= fb
        out.append(nxt)
        hist.append(nxt)
    return Forecast(tuple(out), fell_back)
