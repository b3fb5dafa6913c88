"""Trace features and the logistic real-vs-generated discriminator."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from ..network import DAY_TYPES, ControlTrace, TimeVaryingNetwork

FEATURE_VERSION = 1


def feature_dim(n_stations: int) -> int:
    return 2 * n_stations + 27


def entropy_bits(counts) -> float:
    tot = sum(counts)
    if tot == 0:
        return 0.0
    return -sum(c / tot * math.log2(c / tot) for c in counts if c) + 0.0


def _entropy(counts: np.ndarray, axis: int) -> np.ndarray:
    tot = counts.sum(axis=axis, keepdims=True)
    p = counts / np.where(tot > 0, tot, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=axis) + 0.0


def array_features(tvn: TimeVaryingNetwork, stations: np.ndarray, hours: np.ndarray,
                   length: np.ndarray, day_base: np.ndarray, cost_min: np.ndarray,
                   quality: np.ndarray | None = None) -> np.ndarray:
    """Features for R padded traces at once.

    ``stations`` and ``hours`` are (R, M) arrays valid up to ``length``;
    ``day_base`` is the first slot index of each row's day type. Quality is
    recomputed from ridership unless given.
    """
    s = len(tvn.network.ids)
    r, m = stations.shape
    out = np.zeros((r, feature_dim(s)))
    if r == 0:
        return out
    valid = np.arange(m)[None, :] < length[:, None]
    rows = np.broadcast_to(np.arange(r)[:, None], (r, m))[valid]
    st = stations[valid]
    hr = hours[valid]
    n = np.maximum(length, 1).astype(float)[:, None]
    counts = np.bincount(rows * s + st, minlength=r * s).reshape(r, s)
    sh = np.bincount((rows * s + st) * 24 + hr, minlength=r * s * 24).reshape(r, s, 24)
    hour_counts = sh.sum(axis=1)
    out[:, :s] = counts / n
    out[:, s:2 * s] = _entropy(sh.astype(float), axis=2)
    out[:, 2 * s:2 * s + 24] = hour_counts / n
    out[:, 2 * s + 24] = np.asarray(cost_min, float) / 60.0
    if quality is None:
        board = tvn.boardings
        cols = day_base[:, None] + np.arange(24)[None, :]
        quality = ((sh > 0) * board[:, cols].transpose(1, 0, 2)).sum(axis=(1, 2))
    out[:, 2 * s + 25] = np.log1p(quality)
    pair_ok = valid[:, 1:]
    a = stations[:, :-1][pair_ok]
    b = stations[:, 1:][pair_ok]
    prow = np.broadcast_to(np.arange(r)[:, None], (r, m - 1))[pair_ok]
    pairs = np.bincount((prow * s + a) * s + b, minlength=r * s * s).reshape(r, s * s)
    out[:, 2 * s + 26] = _entropy(pairs.astype(float), axis=1)
    out[length == 0] = 0.0
    return out


def trace_features(tvn: TimeVaryingNetwork, trace: ControlTrace) -> np.ndarray:
    """Fixed-length description of a trace.

    Layout (S = number of stations, stations in id order)::

        [0, S)        share of visits at each station
        [S, 2S)       entropy (bits) of each station's visit hours
        [2S, 2S+24)   share of visits in each hour of day
        2S+24         cost in hours
        2S+25         log1p(quality)
        2S+26         entropy (bits) of consecutive station pairs
    """
    return feature_matrix(tvn, [trace])[0]


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


@dataclass(eq=False)
class Discriminator:
    weights: np.ndarray
    bias: float = 0.0
    version: int = field(default=FEATURE_VERSION)

    @classmethod
    def zeros(cls, n_stations: int) -> Discriminator:
        return cls(np.zeros(feature_dim(n_stations)), 0.0)

    def copy(self) -> Discriminator:
        return Discriminator(self.weights.copy(), self.bias, self.version)

    def score(self, features: np.ndarray) -> np.ndarray | float:
        """Probability that the trace(s) behind ``features`` are real."""
        out = _sigmoid(np.asarray(features) @ self.weights + self.bias)
        return float(out) if np.ndim(out) == 0 else out

    def fit(self, real: np.ndarray, fake: np.ndarray, lr: float, steps: int = 1,
            l2: float = 1e-3) -> float:
        """Gradient steps on the mean logistic loss; returns the final loss."""
        x = np.vstack([real, fake])
        y = np.concatenate([np.ones(len(real)), np.zeros(len(fake))])
        loss = float("nan")
        for _ in range(steps):
            p = _sigmoid(x @ self.weights + self.bias)
            err = p - y
            self.weights = self.weights - lr * (x.T @ err / len(y) + l2 * self.weights)
            self.bias = self.bias - lr * float(err.mean())
            eps = 1e-12
            loss = float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))
        return loss

    def accuracy(self, real: np.ndarray, fake: np.ndarray) -> float:
        hits = np.sum(self.score(real) > 0.5) + np.sum(self.score(fake) <= 0.5)
        return float(hits / (len(real) + len(fake)))


def feature_matrix(tvn: TimeVaryingNetwork, traces: Sequence[ControlTrace]) -> np.ndarray:
    index = tvn.network.index
    m = max((len(t.visits) for t in traces), default=0)
    stations = np.zeros((len(traces), max(m, 1)), dtype=np.int64)
    hours = np.zeros_like(stations)
    for r, t in enumerate(traces):
        for j, v in enumerate(t.visits):
            stations[r, j] = index[v.station_id]
            hours[r, j] = v.slot.hour
    return array_features(
        tvn, stations, hours,
        np.array([len(t.visits) for t in traces], dtype=np.int64),
        np.array([DAY_TYPES.index(t.day_type) * 24 if t.visits else 0 for t in traces], dtype=np.int64),
        np.array([t.cost_min for t in traces], dtype=float),
        np.array([t.quality for t in traces], dtype=float),
    )
