"""Fare-inspection attack analysis and randomized control-schedule generation."""

from .errors import FarecheckError
from .network import (
    ControlTrace,
    RidershipProfile,
    Route,
    Station,
    TimeSlot,
    TimeVaryingNetwork,
    TransitNetwork,
    Visit,
    build_network,
    trace_cost,
    trace_quality,
    travel_cost,
)

__version__ = "0.1.0"

__all__ = [
    "ControlTrace",
    "FarecheckError",
    "RidershipProfile",
    "Route",
    "Station",
    "TimeSlot",
    "TimeVaryingNetwork",
    "TransitNetwork",
    "Visit",
    "build_network",
    "trace_cost",
    "trace_quality",
    "travel_cost",
]
