"""Budget-masked weighted walks over the station graph.

A shift starts on the hour at the first visited station. At every step the
candidates are the stations whose travel + dwell still fits in the remaining
budget; the walk stops when no station fits.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ..errors import BudgetTooSmall
from ..network import DAY_TYPES, ControlTrace, TimeVaryingNetwork, make_trace, trace_cost
from .target import TargetDistribution

# calendar frequency of weekday / Saturday / Sunday
DAY_TYPE_WEIGHTS = np.array([5.0, 1.0, 1.0]) / 7.0


def check_budget(tvn: TimeVaryingNetwork, budget: float) -> None:
    if budget < tvn.network.dwell.min():
        raise BudgetTooSmall(
            f"budget {budget} min is below the smallest dwell time {tvn.network.dwell.min():g} min"
        )


def pick_day_type(rng: np.random.Generator) -> str:
    return DAY_TYPES[int(rng.choice(3, p=DAY_TYPE_WEIGHTS))]


def pick_start_minute(hour_mass: np.ndarray, budget: float, rng: np.random.Generator) -> float:
    """Shift start (minutes since midnight), on the hour, so the shift ends by midnight."""
    last = max(0, int((24 * 60 - budget) // 60))
    w = np.asarray(hour_mass[:last + 1], dtype=float)
    if not w.sum() > 0:
        w = np.ones(last + 1)
    return 60.0 * sample_index(w / w.sum(), rng)


def sample_index(p: np.ndarray, rng: np.random.Generator) -> int:
    """Draw an index from probability vector ``p`` with a single uniform."""
    c = np.cumsum(p)
    i = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
    # guard against landing on trailing zero-probability entries
    while p[min(i, len(p) - 1)] == 0 and i > 0:
        i -= 1
    return min(i, len(p) - 1)


class Shift:
    """Mutable state of one controller shift under construction."""

    __slots__ = ("dist", "dwell", "day_type", "start", "t", "budget", "spent", "stations",
                 "arrivals", "cur")

    def __init__(self, tvn: TimeVaryingNetwork, day_type: str, start: float, budget: float):
        self.dist = tvn.network.distance
        self.dwell = tvn.network.dwell
        self.day_type = day_type
        self.start = start
        self.t = start
        self.budget = float(budget)
        self.spent = 0.0
        self.stations: list[int] = []
        self.arrivals: list[float] = []
        self.cur: int | None = None

    def copy(self) -> Shift:
        other = Shift.__new__(Shift)
        for name in Shift.__slots__:
            setattr(other, name, getattr(self, name))
        other.stations = list(self.stations)
        other.arrivals = list(self.arrivals)
        return other

    def travel(self) -> np.ndarray:
        return np.zeros(len(self.dwell)) if self.cur is None else self.dist[self.cur]

    def options(self) -> tuple[np.ndarray, np.ndarray]:
        """(travel minutes, affordable mask) for every candidate next station."""
        travel = self.travel()
        return travel, (self.spent + travel) + self.dwell <= self.budget

    def hour(self) -> int:
        return int(self.t // 60) % 24

    def advance(self, i: int, travel: float) -> None:
        self.arrivals.append(self.t + travel)
        self.t = (self.t + travel) + self.dwell[i]
        self.spent = (self.spent + travel) + self.dwell[i]
        self.stations.append(i)
        self.cur = i

    def trace(self, tvn: TimeVaryingNetwork, controller_id: str) -> ControlTrace:
        ids = tvn.network.ids
        return make_trace(tvn, controller_id, [ids[i] for i in self.stations], self.start,
                          self.day_type)


def weighted_walk(tvn: TimeVaryingNetwork, budget: float, target: TargetDistribution,
                  rng: np.random.Generator, day_type: str | None = None,
                  controller_id: str = "baseline") -> ControlTrace:
    """One shift: next station drawn from target weights at its arrival slot, budget-masked."""
    check_budget(tvn, budget)
    day_type = day_type or pick_day_type(rng)
    base = DAY_TYPES.index(day_type) * 24
    start = pick_start_minute(target.hour_mass(day_type), budget, rng)
    shift = Shift(tvn, day_type, start, budget)
    cols = np.arange(len(tvn.network.ids))
    while True:
        travel, mask = shift.options()
        if not mask.any():
            break
        hours = ((shift.t + travel) // 60).astype(int) % 24
        w = target.weights[base + hours, cols] * mask
        if not w.sum() > 0:
            w = mask.astype(float)
        i = sample_index(w / w.sum(), rng)
        shift.advance(i, float(travel[i]))
    return shift.trace(tvn, controller_id)


def sample_baseline(tvn: TimeVaryingNetwork, budget: float, target: TargetDistribution,
                    rng: np.random.Generator, day_type: str | None = None,
                    controller_id: str = "baseline") -> ControlTrace:
    return weighted_walk(tvn, budget, target, rng, day_type, controller_id)


def quality_per_minute(t: ControlTrace) -> float:
    return t.quality / t.cost_min if t.cost_min > 0 else 0.0


def derive_training_sequences(tvn: TimeVaryingNetwork, budget: float, n: int,
                              target: TargetDistribution, rng: np.random.Generator,
                              oversample: int = 5) -> list[ControlTrace]:
    """Draw ``oversample * n`` walks and keep the ``n`` with the best quality per minute."""
    check_budget(tvn, budget)
    if n <= 0:
        return []
    pool = [weighted_walk(tvn, budget, target, rng, controller_id=f"real{i:05d}")
            for i in range(oversample * n)]
    order = sorted(range(len(pool)), key=lambda i: (-quality_per_minute(pool[i]), i))
    return [pool[i] for i in order[:n]]


def greedy_improve(tvn: TimeVaryingNetwork, trace: ControlTrace, budget: float) -> ControlTrace:
    """Hill-climb on quality with single-visit substitutions that stay within budget."""
    if not trace.visits:
        return trace
    ids = tvn.network.ids
    start = trace.visits[0].arrive_min
    day_type = trace.day_type
    stations = list(trace.stations)
    current = trace
    while True:
        best = None
        for pos in range(len(stations)):
            for cand in ids:
                if cand == stations[pos]:
                    continue
                trial = stations[:pos] + [cand] + stations[pos + 1:]
                if trace_cost(tvn, trial) > budget:
                    continue
                t = make_trace(tvn, trace.controller_id, trial, start, day_type)
                if t.quality > (best.quality if best else current.quality):
                    best = t
        if best is None:
            return current
        current = best
        stations = list(best.stations)


def visit_counts(traces: Sequence[ControlTrace], station_ids: Sequence[str]) -> np.ndarray:
    idx = {s: i for i, s in enumerate(station_ids)}
    v = np.zeros(len(station_ids))
    for t in traces:
        for visit in t.visits:
            v[idx[visit.station_id]] += 1
    return v
