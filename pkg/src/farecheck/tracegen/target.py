"""Ridership-derived control-location target distribution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateRidership
from ..network import DAY_TYPES, N_SLOTS, TimeSlot, TimeVaryingNetwork

DEFAULT_LAMBDA = 0.2
DEFAULT_SIGMA = 1.0


@dataclass(frozen=True, eq=False)
class TargetDistribution:
    """Per-slot distribution over stations.

    ``weights[slot.index]`` is a probability vector over ``station_ids``.
    ``slot_mass`` holds, per day type, the distribution of ridership over
    hours (24 entries per day type, each block summing to 1); it drives
    shift start times.
    """

    station_ids: tuple[str, ...]
    weights: np.ndarray          # (72, S)
    slot_mass: np.ndarray        # (72,)
    randomness_temp: float
    smoothing: float

    def weight(self, station_id: str, slot: TimeSlot) -> float:
        return float(self.weights[slot.index, self.station_ids.index(station_id)])

    def hour_mass(self, day_type: str) -> np.ndarray:
        d = DAY_TYPES.index(day_type)
        return self.slot_mass[d * 24:(d + 1) * 24]


def _hour_kernel(sigma: float) -> np.ndarray:
    """24x24 Gaussian smoothing kernel on the circular hour axis; columns sum to 1."""
    if sigma <= 0:
        return np.eye(24)
    h = np.arange(24)
    diff = np.abs(h[:, None] - h[None, :])
    diff = np.minimum(diff, 24 - diff)
    k = np.exp(-0.5 * (diff / sigma) ** 2)
    return k / k.sum(axis=0, keepdims=True)


def _normalise_rows(m: np.ndarray) -> np.ndarray:
    tot = m.sum(axis=1, keepdims=True)
    uniform = np.full_like(m, 1.0 / m.shape[1])
    return np.where(tot > 0, m / np.where(tot > 0, tot, 1.0), uniform)


def make_target(tvn: TimeVaryingNetwork, lam: float = DEFAULT_LAMBDA,
                sigma: float = DEFAULT_SIGMA) -> TargetDistribution:
    """Normalise ridership per slot, smooth across hours, then mix toward uniform by ``lam``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("randomness temperature must lie in [0, 1]")
    if sigma < 0:
        raise ValueError("smoothing width must be >= 0")
    board = tvn.boardings.T            # (72, S)
    if not board.sum() > 0:
        raise DegenerateRidership("ridership profile is all zero")
    n = board.shape[1]

    tot = board.sum(axis=1, keepdims=True)
    per_slot = np.divide(board, tot, out=np.zeros_like(board), where=tot > 0)
    kern = _hour_kernel(sigma)
    smoothed = np.empty_like(per_slot)
    mass = np.empty(N_SLOTS)
    for d in range(len(DAY_TYPES)):
        block = slice(d * 24, (d + 1) * 24)
        smoothed[block] = kern @ per_slot[block]
        hours = kern @ tot[block, 0]
        mass[block] = hours / hours.sum() if hours.sum() > 0 else 1.0 / 24
    smoothed = _normalise_rows(smoothed)

    weights = lam / n + (1.0 - lam) * smoothed
    return TargetDistribution(tvn.network.ids, weights, mass, float(lam), float(sigma))
