import numpy as np
import pytest

from farecheck.network import RidershipProfile, Route, Station, TimeSlot, TimeVaryingNetwork, build_network
from farecheck.synth import SynthSpec, synth_city


def station(sid, dwell=10, zone=None):
    return Station(sid, f"Station {sid}", 46.5, 6.6, zone, dwell)


@pytest.fixture
def toy_net():
    """A-B-C on route R1 (4, 6 min), B-D on route R2 (5 min)."""
    return build_network(
        [station(s) for s in "ABCD"],
        [Route("R1", "Red", ("A", "B", "C"), (4, 6)), Route("R2", "Blue", ("B", "D"), (5,))],
    )


@pytest.fixture
def toy_tvn(toy_net):
    counts = {("A", TimeSlot("WD", 8)): 50.0, ("B", TimeSlot("WD", 8)): 20.0,
              ("C", TimeSlot("WD", 9)): 70.0, ("D", TimeSlot("SA", 12)): 5.0}
    return TimeVaryingNetwork(toy_net, RidershipProfile(counts))


@pytest.fixture(scope="session")
def default_city():
    return synth_city(SynthSpec())


@pytest.fixture(scope="session")
def default_tvn(default_city):
    return TimeVaryingNetwork(default_city.network, default_city.ridership)


@pytest.fixture(scope="session")
def small_city():
    return synth_city(SynthSpec(seed=3, n_stations=8, n_routes=3, days=28))


@pytest.fixture(scope="session")
def small_tvn(small_city):
    return TimeVaryingNetwork(small_city.network, small_city.ridership)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
