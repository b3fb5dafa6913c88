"""Schedule evaluation: distribution similarity, day-to-day randomness, and
the before/after attack surface.

Randomness is measured as the mean inter-period RMSE of station visit-count
vectors (higher means schedules differ more from one day to the next).
Attack-surface metrics compare a historical sighting log against a generated
schedule on identical scenario parameters.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .attack import (
    InspectionStats,
    fit_markov,
    inspection_stats,
    min_inspection_path,
    predictability,
    ride_risk,
)
from .errors import DimensionMismatch, EmptySample, InsufficientData, NeedTwoPeriods, NoPath, UnknownStation
from .ingest import SightingLog
from .network import DAY_TYPES, N_SLOTS, ControlTrace, TimeSlot, TransitNetwork
from .tracegen.gan import group_periods
from .tracegen.policy import sample_rows
from .tracegen.target import TargetDistribution
from .tracegen.walks import visit_counts

KS_C_05 = 1.358
SIMILARITY_SEED = 20150101
SPLIT = 0.8


@dataclass(frozen=True)
class KSResult:
    d_stat: float
    n: int
    m: int
    significant_at_05: bool

    @property
    def critical_value(self) -> float:
        return ks_critical(self.n, self.m)

    def to_json(self) -> dict:
        return {"d_stat": self.d_stat, "n": self.n, "m": self.m,
                "significant_at_05": self.significant_at_05}


def ks_critical(n: int, m: int, c_alpha: float = KS_C_05) -> float:
    return c_alpha * math.sqrt((n + m) / (n * m))


def ks_two_sample(a, b) -> KSResult:
    """Two-sample Kolmogorov-Smirnov statistic, exact over the pooled points."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise EmptySample("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    return KSResult(d, int(a.size), int(b.size), d > ks_critical(a.size, b.size))


def _visit_sample(traces: Sequence[ControlTrace], station_ids: Sequence[str]):
    index = {s: i for i, s in enumerate(station_ids)}
    st, slots = [], []
    for t in traces:
        for v in t.visits:
            if v.station_id not in index:
                raise UnknownStation(f"unknown station {v.station_id!r}")
            st.append(index[v.station_id])
            slots.append(v.slot.index)
    return np.array(st, dtype=np.int64), np.array(slots, dtype=np.int64)


def distribution_similarity(traces: Sequence[ControlTrace], target: TargetDistribution,
                            seed: int = SIMILARITY_SEED) -> KSResult:
    """KS between visited station indices and a same-size draw from ``target``.

    The reference sample is drawn at the slot of each visit, so the comparison
    is about where controls happen given when they happen. Stations are
    ordered by id.
    """
    st, slots = _visit_sample(traces, target.station_ids)
    if st.size == 0:
        raise EmptySample("schedule has no visits")
    ref = sample_rows(target.weights[slots], np.random.default_rng(seed))
    return ks_two_sample(st, ref)


def dispersion_rmse(vectors) -> float:
    """Mean over unordered period pairs of sqrt(sum_s (v1_s - v2_s)^2 / S)."""
    vs = [np.asarray(v, dtype=float) for v in vectors]
    if len(vs) < 2:
        raise NeedTwoPeriods(f"dispersion needs at least two periods, got {len(vs)}")
    if len({v.shape for v in vs}) != 1 or vs[0].ndim != 1:
        raise DimensionMismatch("all period vectors must share one station dimension")
    m = np.stack(vs)
    s = m.shape[1]
    vals = [math.sqrt(float(np.sum((m[i] - m[j]) ** 2)) / s) for i, j in combinations(range(len(m)), 2)]
    return float(np.mean(vals))


def period_vectors(periods: Sequence[Sequence[ControlTrace]], station_ids: Sequence[str]) -> list[np.ndarray]:
    return [visit_counts(p, station_ids) for p in periods]


def schedule_presence(periods: Sequence[Sequence[ControlTrace]], station_ids: Sequence[str]) -> np.ndarray:
    """(S, 72) fraction of same-day-type periods in which a station was visited in a slot."""
    index = {s: i for i, s in enumerate(station_ids)}
    hits = np.zeros((len(station_ids), N_SLOTS))
    n_days = dict.fromkeys(DAY_TYPES, 0)
    for period in periods:
        kinds = {t.day_type for t in period if t.visits}
        if not kinds:
            continue
        for dt in kinds:
            n_days[dt] += 1
        seen = set()
        for t in period:
            for v in t.visits:
                if v.station_id not in index:
                    raise UnknownStation(f"unknown station {v.station_id!r}")
                seen.add((index[v.station_id], v.slot.index))
        for i, j in seen:
            hits[i, j] += 1
    for d, dt in enumerate(DAY_TYPES):
        cols = slice(d * 24, (d + 1) * 24)
        hits[:, cols] = hits[:, cols] / n_days[dt] if n_days[dt] else 0.0
    return hits


def schedule_stats(traces: Sequence[ControlTrace], station_ids: Sequence[str]) -> InspectionStats:
    """Inspection statistics a rider would estimate from a generated schedule."""
    periods = group_periods(list(traces))
    counts = visit_counts(traces, station_ids)
    heat = np.zeros((len(station_ids), 24), dtype=np.int64)
    index = {s: i for i, s in enumerate(station_ids)}
    for t in traces:
        for v in t.visits:
            heat[index[v.station_id], v.slot.hour] += 1
    days = dict.fromkeys(DAY_TYPES, 0)
    for p in periods:
        for dt in {t.day_type for t in p if t.visits}:
            days[dt] += 1
    return InspectionStats(tuple(station_ids), counts, schedule_presence(periods, station_ids), heat,
                           np.zeros(len(station_ids)), days)


# --------------------------------------------------------------------------
# before / after attack surface
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Trip:
    """A fare-evading ride through ``stations`` during ``slot``."""

    stations: tuple[str, ...]
    slot: TimeSlot


def trip_risk(stats: InspectionStats, trip: Trip) -> float:
    return ride_risk([stats.presence_prob(s, trip.slot) for s in trip.stations])


def mean_evasion_payoff(stats: InspectionStats, trips: Sequence[Trip], fine: float, ticket: float) -> float:
    """Mean of ticket - P_ins * fine over the trip set."""
    if not trips:
        raise EmptySample("trip set is empty")
    return float(np.mean([ticket - trip_risk(stats, t) * fine for t in trips]))


def payoff_reduction(before: InspectionStats, after_schedule, fine: float, ticket: float,
                     trips: Sequence[Trip]) -> float:
    """Evasion payoff under ``before`` minus under ``after_schedule``; positive = attacker worse off.

    ``after_schedule`` is a list of traces (grouped into periods by controller
    id) or another :class:`InspectionStats`.
    """
    after = after_schedule if isinstance(after_schedule, InspectionStats) \
        else schedule_stats(after_schedule, before.station_ids)
    if tuple(after.station_ids) != tuple(before.station_ids):
        raise UnknownStation("before and after cover different station sets")
    return (mean_evasion_payoff(before, trips, fine, ticket)
            - mean_evasion_payoff(after, trips, fine, ticket))


def hotspots(stats: InspectionStats, fraction: float = 0.15) -> tuple[str, ...]:
    """The most-inspected ``max(1, round(fraction * S))`` stations."""
    k = max(1, round(fraction * len(stats.station_ids)))
    order = sorted(range(len(stats.station_ids)), key=lambda i: (-stats.counts[i], stats.station_ids[i]))
    return tuple(stats.station_ids[i] for i in order[:k])


def avoiding_trips(net: TransitNetwork, stats: InspectionStats, hours: Sequence[int] = range(6, 23),
                   day_type: str = "WD", fraction: float = 0.15) -> list[Trip]:
    """Rides a log-informed attacker would take: least-inspected paths that skip every hotspot.

    One candidate per ordered pair of non-hotspot stations and hour; pairs whose
    best path still crosses a hotspot are dropped.
    """
    hot = set(hotspots(stats, fraction))
    quiet = [s for s in net.ids if s not in hot]
    out = []
    for h in hours:
        slot = TimeSlot(day_type, h)
        for o in quiet:
            for d in quiet:
                if o == d:
                    continue
                try:
                    path = min_inspection_path(net, stats, o, d, slot)
                except NoPath:
                    continue
                if not hot.intersection(path.stations):
                    out.append(Trip(path.stations, slot))
    return out


def _sequence_split(data) -> tuple[list[list[str]], list[list[str]]]:
    if isinstance(data, SightingLog):
        train, test = data.split_days(SPLIT)
        return train.daily_sequences(), test.daily_sequences()
    seqs = [list(t.stations) for t in sorted(data, key=lambda t: t.controller_id)]
    cut = math.ceil(SPLIT * len(seqs))
    return seqs[:cut], seqs[cut:]


def markov_accuracy(data, k: int = 1) -> float:
    """Top-1 order-k accuracy with an 80/20 split (days for a log, traces for a schedule)."""
    train, test = _sequence_split(data)
    if not test:
        raise InsufficientData("too little data for an 80/20 split")
    return predictability(fit_markov(train, k), test).accuracy


def predictability_reduction(before, after_schedule, k: int = 1) -> float:
    """Historical top-1 accuracy minus schedule accuracy; positive = less predictable after."""
    return markov_accuracy(before, k) - markov_accuracy(after_schedule, k)


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EvalReport:
    ks: KSResult
    dispersion_rmse: float
    payoff_delta: float
    predictability_delta: float
    station_ids: tuple[str, ...]
    shares_before: np.ndarray
    shares_after: np.ndarray
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "ks": self.ks.to_json(),
            "dispersion_rmse": self.dispersion_rmse,
            "payoff_delta": self.payoff_delta,
            "predictability_delta": self.predictability_delta,
            "shares_before": {s: float(v) for s, v in zip(self.station_ids, self.shares_before)},
            "shares_after": {s: float(v) for s, v in zip(self.station_ids, self.shares_after)},
            "station_order": list(self.station_ids),
            **self.extra,
        }


def evaluate_schedule(net: TransitNetwork, before_log: SightingLog, traces: Sequence[ControlTrace],
                      target: TargetDistribution, fine: float, ticket: float, k: int = 1,
                      trips: Sequence[Trip] | None = None,
                      ridership_target: TargetDistribution | None = None,
                      seed: int = SIMILARITY_SEED) -> EvalReport:
    """All metrics for one historical log and one generated schedule.

    Trips default to :func:`avoiding_trips` under the historical statistics.
    With ``ridership_target`` the report also carries a KS comparison against
    pure ridership as ``ks_ridership``.
    """
    ids = net.ids
    before = inspection_stats(before_log, net)
    if trips is None:
        trips = avoiding_trips(net, before)
    counts = visit_counts(traces, ids)
    if counts.sum() == 0:
        raise EmptySample("schedule has no visits")
    extra = {"n_trips": len(trips)}
    if ridership_target is not None:
        extra["ks_ridership"] = distribution_similarity(traces, ridership_target, seed).to_json()
    return EvalReport(
        ks=distribution_similarity(traces, target, seed),
        dispersion_rmse=dispersion_rmse(period_vectors(group_periods(list(traces)), ids)),
        payoff_delta=payoff_reduction(before, traces, fine, ticket, trips),
        predictability_delta=predictability_reduction(before_log, traces, k),
        station_ids=tuple(ids),
        shares_before=before.station_share,
        shares_after=counts / counts.sum(),
        extra=extra,
    )
