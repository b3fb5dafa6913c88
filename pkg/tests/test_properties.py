"""Property tests for the invariants each module promises."""

import io
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from farecheck.attack import AttackScenario, inspection_stats, min_inspection_path, ride_risk, selective_purchase
from farecheck.evaluate import dispersion_rmse, ks_two_sample, payoff_reduction, Trip
from farecheck.ingest import ControlSighting, SightingLog, parse_sightings, write_sightings
from farecheck.network import (
    ALL_SLOTS,
    RidershipProfile,
    Route,
    TimeSlot,
    TimeVaryingNetwork,
    build_network,
    check_trace,
    make_trace,
    trace_cost,
    travel_cost,
)
from farecheck.tracegen import greedy_improve, make_target, sample_baseline
from farecheck.tracegen.discriminator import Discriminator, feature_matrix
from farecheck.tracegen.policy import masked_softmax

from conftest import station

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])


@st.composite
def networks(draw):
    n = draw(st.integers(2, 7))
    ids = [f"N{i}" for i in range(n)]
    routes = []
    # a random spanning tree keeps the graph connected, extra routes add cycles
    for i in range(1, n):
        j = draw(st.integers(0, i - 1))
        routes.append(Route(f"T{i}", "t", (ids[j], ids[i]), (draw(st.integers(1, 30)),)))
    for k in range(draw(st.integers(0, 3))):
        stops = draw(st.lists(st.sampled_from(ids), min_size=2, max_size=4, unique=True))
        legs = tuple(draw(st.integers(1, 30)) for _ in stops[1:])
        routes.append(Route(f"X{k}", "x", tuple(stops), legs))
    dwell = [draw(st.integers(1, 15)) for _ in ids]
    return build_network([station(s, d) for s, d in zip(ids, dwell)], routes)


@st.composite
def tv_networks(draw):
    net = draw(networks())
    counts = {}
    for sid in net.ids:
        for h in draw(st.lists(st.integers(0, 23), max_size=4)):
            counts[(sid, TimeSlot("WD", h))] = float(draw(st.integers(0, 100)))
    return TimeVaryingNetwork(net, RidershipProfile(counts))


@SETTINGS
@given(networks(), st.data())
def test_travel_cost_is_a_metric(net, data):
    p, q, r = (data.draw(st.sampled_from(net.ids)) for _ in range(3))
    assert travel_cost(net, p, p) == 0
    assert travel_cost(net, p, q) == travel_cost(net, q, p)
    assert travel_cost(net, p, r) <= travel_cost(net, p, q) + travel_cost(net, q, r)


@SETTINGS
@given(networks())
def test_adjacency_is_bipartite(net):
    stations = set(net.ids)
    routes = {r.id for r in net.routes}
    for s, r in net.adjacency:
        assert s in stations and r in routes
    assert all(net.degree(s) >= 1 for s in net.ids)


@SETTINGS
@given(networks(), st.data())
def test_trace_cost_is_additive(net, data):
    t1 = data.draw(st.lists(st.sampled_from(net.ids), min_size=1, max_size=6))
    t2 = data.draw(st.lists(st.sampled_from(net.ids), min_size=1, max_size=6))
    assert trace_cost(net, t1 + t2) == trace_cost(net, t1) + trace_cost(net, t2) + travel_cost(net, t1[-1], t2[0])


@SETTINGS
@given(tv_networks(), st.data())
def test_quality_monotone_and_cost_recomputes(tvn, data):
    ids = tvn.network.ids
    seq = data.draw(st.lists(st.sampled_from(ids), max_size=8))
    start = 60.0 * data.draw(st.integers(0, 20))
    t = make_trace(tvn, "c", seq, start, "WD")
    assert t.quality >= 0
    assert check_trace(tvn, t) == []
    assert trace_cost(tvn, t.visits) == t.cost_min
    longer = make_trace(tvn, "c", seq + [data.draw(st.sampled_from(ids))], start, "WD")
    assert longer.quality >= t.quality


@SETTINGS
@given(tv_networks(), st.data())
def test_baseline_and_greedy_stay_feasible(tvn, data):
    assume(tvn.boardings.sum() > 0)
    budget = float(data.draw(st.integers(int(tvn.network.dwell.min()), 300)))
    seed = data.draw(st.integers(0, 2**31))
    target = make_target(tvn, data.draw(st.floats(0, 1)), data.draw(st.sampled_from([0.0, 1.0, 2.5])))
    t = sample_baseline(tvn, budget, target, np.random.default_rng(seed), day_type="WD")
    assert t == sample_baseline(tvn, budget, target, np.random.default_rng(seed), day_type="WD")
    assert check_trace(tvn, t, budget) == []
    better = greedy_improve(tvn, t, budget)
    assert check_trace(tvn, better, budget) == []
    assert better.quality >= t.quality


@SETTINGS
@given(st.integers(2, 12), st.data())
def test_masked_softmax_zeroes_unaffordable(s, data):
    z = np.array(data.draw(st.lists(st.floats(-30, 30), min_size=s, max_size=s)))[None, :]
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=s, max_size=s)))[None, :]
    assume(mask.any())
    p = masked_softmax(z, mask)
    assert (p[~mask] == 0).all()
    assert p.sum() == pytest.approx(1.0)


samples = st.lists(st.integers(-50, 50), min_size=1, max_size=60)


@SETTINGS
@given(samples, samples)
def test_ks_symmetric_and_monotone_invariant(a, b):
    r = ks_two_sample(a, b)
    assert 0 <= r.d_stat <= 1
    assert r.d_stat == ks_two_sample(b, a).d_stat
    f = lambda x: np.exp(np.asarray(x) / 7.0) * 3 - 2  # noqa: E731
    assert r.d_stat == ks_two_sample(f(a), f(b)).d_stat


@SETTINGS
@given(st.integers(1, 6), st.integers(2, 6), st.data())
def test_dispersion_permutation_invariant(s, n, data):
    vecs = [np.array(data.draw(st.lists(st.integers(0, 9), min_size=s, max_size=s)), float) for _ in range(n)]
    d = dispersion_rmse(vecs)
    perm = data.draw(st.permutations(range(n)))
    assert d == pytest.approx(dispersion_rmse([vecs[i] for i in perm]), abs=1e-12)
    identical = all(np.array_equal(v, vecs[0]) for v in vecs)
    assert (d == 0) == identical


@SETTINGS
@given(st.floats(0, 1), st.floats(0, 1000), st.floats(0, 100), st.integers(-10, 10))
def test_purchase_scale_invariant(p, fine, ticket, k):
    c = 2.0 ** k
    a = selective_purchase(AttackScenario(p, fine, ticket))
    b = selective_purchase(AttackScenario(p, fine * c, ticket * c))
    assert a.decision == b.decision


def _log(draw, ids, n):
    t0 = datetime(2017, 5, 1, tzinfo=timezone.utc)
    out = []
    for _ in range(n):
        ts = t0 + timedelta(minutes=draw(st.integers(0, 60 * 24 * 30)))
        out.append(ControlSighting(ts, draw(st.sampled_from(ids)), 46.5, 6.6, draw(st.booleans())))
    return SightingLog(tuple(out))


@SETTINGS
@given(networks(), st.data())
def test_inspection_stats_invariants(net, data):
    log = _log(data.draw, net.ids, data.draw(st.integers(1, 40)))
    stats = inspection_stats(log, net)
    assert stats.station_share.sum() == pytest.approx(1.0, abs=1e-9)
    assert stats.heatmap.sum() == len(log)
    assert np.array_equal(stats.heatmap.sum(axis=1), stats.counts)
    assert ((stats.presence >= 0) & (stats.presence <= 1)).all()
    assert ((stats.inside_rate >= 0) & (stats.inside_rate <= 1)).all()


@SETTINGS
@given(networks(), st.data())
def test_rerouting_never_riskier_than_shortest(net, data):
    log = _log(data.draw, net.ids, data.draw(st.integers(1, 60)))
    stats = inspection_stats(log, net)
    slot = data.draw(st.sampled_from(ALL_SLOTS))
    o, d = data.draw(st.sampled_from(net.ids)), data.draw(st.sampled_from(net.ids))
    assume(o != d)
    best = min_inspection_path(net, stats, o, d, slot)
    # reconstruct one travel-shortest path by walking the distance matrix
    dist, legs = net.distance, net.leg_matrix
    path, cur, goal = [net.index[o]], net.index[o], net.index[d]
    while cur != goal:
        cur = next(j for j in range(len(net.ids))
                   if np.isfinite(legs[cur, j]) and legs[cur, j] + dist[j, goal] == dist[cur, goal])
        path.append(cur)
    shortest_risk = ride_risk([stats.presence[i, slot.index] for i in path])
    assert best.risk <= shortest_risk + 1e-12


@SETTINGS
@given(networks(), st.data())
def test_payoff_antisymmetric(net, data):
    a = inspection_stats(_log(data.draw, net.ids, 20), net)
    b = inspection_stats(_log(data.draw, net.ids, 20), net)
    trips = [Trip((s,), TimeSlot("WD", data.draw(st.integers(0, 23)))) for s in net.ids]
    fine, ticket = data.draw(st.floats(0, 200)), data.draw(st.floats(0, 10))
    assert payoff_reduction(a, b, fine, ticket, trips) == pytest.approx(-payoff_reduction(b, a, fine, ticket, trips),
                                                                        abs=1e-9)


@SETTINGS
@given(networks(), st.data())
def test_sightings_round_trip(net, data):
    log = _log(data.draw, net.ids, data.draw(st.integers(1, 30)))
    buf = io.StringIO()
    write_sightings(log, buf)
    again = parse_sightings(io.StringIO(buf.getvalue()))
    assert [(s.timestamp, s.station_id, s.inside_vehicle) for s in again] == \
        [(s.timestamp, s.station_id, s.inside_vehicle) for s in log]


@SETTINGS
@given(tv_networks(), st.data())
def test_discriminator_score_follows_permutation(tvn, data):
    ids = tvn.network.ids
    traces = [make_trace(tvn, f"c{i}", data.draw(st.lists(st.sampled_from(ids), max_size=5)), 420.0, "WD")
              for i in range(data.draw(st.integers(1, 6)))]
    d = Discriminator(np.array(data.draw(st.lists(st.floats(-3, 3), min_size=2 * len(ids) + 27,
                                                  max_size=2 * len(ids) + 27))), 0.3)
    perm = data.draw(st.permutations(range(len(traces))))
    scores = d.score(feature_matrix(tvn, traces))
    again = d.score(feature_matrix(tvn, [traces[i] for i in perm]))
    np.testing.assert_allclose(np.atleast_1d(scores)[list(perm)], np.atleast_1d(again), rtol=1e-12, atol=0)
