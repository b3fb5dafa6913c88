import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from farecheck.attack import inspection_stats
from farecheck.errors import DimensionMismatch, EmptySample, InsufficientData, NeedTwoPeriods
from farecheck.evaluate import (
    Trip,
    avoiding_trips,
    distribution_similarity,
    dispersion_rmse,
    hotspots,
    ks_critical,
    ks_two_sample,
    markov_accuracy,
    payoff_reduction,
    predictability_reduction,
    schedule_presence,
    schedule_stats,
)
from farecheck.network import ControlTrace, TimeSlot, Visit, make_trace
from farecheck.tracegen import make_target

from test_attack import log_from_days


def ecdf_oracle(a, b):
    """sup |F_a - F_b| evaluated point by point over the pooled sample."""
    best = 0.0
    for x in list(a) + list(b):
        fa = sum(v <= x for v in a) / len(a)
        fb = sum(v <= x for v in b) / len(b)
        best = max(best, abs(fa - fb))
    return best


def test_ks_identity_and_disjoint():
    assert ks_two_sample([1, 2, 3], [1, 2, 3]).d_stat == 0
    r = ks_two_sample([0, 0, 0], [1, 1, 1])
    assert r.d_stat == 1 and (r.n, r.m) == (3, 3)
    with pytest.raises(EmptySample):
        ks_two_sample([], [1])


def test_ks_matches_oracle_and_scipy():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.normal(size=200)
        b = rng.normal(0.2, 1.1, size=int(rng.integers(150, 200)))
        d = ks_two_sample(a, b).d_stat
        assert d == pytest.approx(ecdf_oracle(a, b), abs=1e-12)
        assert d == pytest.approx(ks_2samp(a, b).statistic, abs=1e-12)


def test_ks_frozen_value():
    # hand-checked: at x=2, F_a = 2/3 and F_b = 0
    r = ks_two_sample([1, 2, 5], [3, 4, 6, 7])
    assert r.d_stat == pytest.approx(2 / 3)
    assert r.significant_at_05 is False
    assert ks_critical(3, 4) == pytest.approx(1.358 * math.sqrt(7 / 12))


def _visits_from(stations, slots, ids):
    return [ControlTrace("x", tuple(Visit(ids[s], TimeSlot.from_index(int(j)), 0.0, 10.0)
                                    for s, j in zip(stations, slots)), 0.0, 0.0)]


def test_similarity_self_test(default_tvn):
    target = make_target(default_tvn, lam=0.0)
    rng = np.random.default_rng(77)
    slots = rng.integers(0, 72, size=10_000)
    stations = [rng.choice(20, p=target.weights[j]) for j in slots]
    r = distribution_similarity(_visits_from(stations, slots, default_tvn.network.ids), target)
    assert r.n == r.m == 10_000
    assert not r.significant_at_05


def test_similarity_single_station_vs_uniform(default_tvn):
    target = make_target(default_tvn, lam=1.0)
    traces = _visits_from([19] * 500, [8] * 500, default_tvn.network.ids)
    assert distribution_similarity(traces, target).d_stat >= 1 - 1 / 20
    with pytest.raises(EmptySample):
        distribution_similarity([], target)


def test_similarity_is_seeded(default_tvn):
    target = make_target(default_tvn)
    traces = _visits_from([1, 2, 3] * 50, [8, 9, 10] * 50, default_tvn.network.ids)
    assert distribution_similarity(traces, target) == distribution_similarity(traces, target)


def test_dispersion():
    v = np.array([3.0, 1, 0, 2])
    assert dispersion_rmse([v, v, v]) == 0
    moved = v.copy()
    moved[0] -= 1
    moved[2] += 1
    assert dispersion_rmse([v, moved]) == pytest.approx(math.sqrt(0.5), abs=1e-12)
    with pytest.raises(NeedTwoPeriods):
        dispersion_rmse([v])
    with pytest.raises(DimensionMismatch):
        dispersion_rmse([v, v[:3]])


def test_dispersion_mean_over_pairs():
    a, b, c = np.zeros(2), np.array([2.0, 0]), np.array([0, 2.0])
    # pairs: ab sqrt(2), ac sqrt(2), bc 2
    assert dispersion_rmse([a, b, c]) == pytest.approx((2 * math.sqrt(2) + 2) / 3)


def test_schedule_presence(toy_tvn):
    wd = [make_trace(toy_tvn, "d000/c000", ["A", "B"], 480.0, "WD"),
          make_trace(toy_tvn, "d000/c001", ["A"], 480.0, "WD")]
    wd2 = [make_trace(toy_tvn, "d001/c000", ["C"], 600.0, "WD")]
    sa = [make_trace(toy_tvn, "d005/c000", ["A"], 480.0, "SA")]
    p = schedule_presence([wd, wd2, sa], toy_tvn.network.ids)
    assert p[0, TimeSlot("WD", 8).index] == 0.5
    assert p[2, TimeSlot("WD", 10).index] == 0.5
    assert p[0, TimeSlot("SA", 8).index] == 1.0
    assert p[:, 48:].sum() == 0


def test_payoff_reduction_trivial_cases(default_city, default_tvn):
    stats = inspection_stats(default_city.sightings, default_city.network)
    trips = avoiding_trips(default_city.network, stats, hours=[8, 17])
    assert trips
    assert payoff_reduction(stats, stats, 100, 3, trips) == 0
    sched = [make_trace(default_tvn, f"d{d:03d}/c000", ["S01", "S02"], 480.0, "WD") for d in range(3)]
    assert payoff_reduction(stats, sched, 0, 3, trips) == 0
    after = schedule_stats(sched, default_city.network.ids)
    assert payoff_reduction(stats, after, 100, 3, trips) == -payoff_reduction(after, stats, 100, 3, trips)


def test_avoiding_trips_skip_hotspots(default_city):
    stats = inspection_stats(default_city.sightings, default_city.network)
    hot = set(hotspots(stats))
    assert hot == set(default_city.truth.hotspots)
    trips = avoiding_trips(default_city.network, stats, hours=[9])
    assert all(isinstance(t, Trip) and not hot.intersection(t.stations) for t in trips)
    assert all(t.slot == TimeSlot("WD", 9) for t in trips)


def _random_traces(tvn, n, rng):
    ids = tvn.network.ids
    return [make_trace(tvn, f"d{i:03d}/c000", list(rng.choice(ids, size=12)), 360.0, "WD") for i in range(n)]


def test_predictability_reduction(toy_tvn):
    cycle = log_from_days([["A", "B", "C", "D"] * 4] * 50)
    assert predictability_reduction(cycle, cycle) == 0
    after = _random_traces(toy_tvn, 1000, np.random.default_rng(0))
    assert markov_accuracy(cycle) == 1.0
    assert predictability_reduction(cycle, after) == pytest.approx(0.75, abs=0.05)
    with pytest.raises(InsufficientData):
        predictability_reduction(cycle, [make_trace(toy_tvn, "c", ["A"], 0.0, "WD")])
