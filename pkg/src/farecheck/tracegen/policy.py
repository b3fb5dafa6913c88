"""Tabular order-k softmax generator policy.

The policy conditions on the last ``order`` visited stations and on the slot
at decision time. Its logits live in a dense table indexed by
``(history, slot, station)``; a history is the last ``order`` station
indices written in base S+1, with S standing for "before the first visit".

Sampling is masked to stations that still fit in the remaining budget, so
every rollout is feasible by construction. Rollouts run in lockstep batches
(:class:`Rollouts`), which is what makes Monte-Carlo reward estimation cheap.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyBatch
from ..network import DAY_TYPES, N_SLOTS, ControlTrace, TimeSlot, TimeVaryingNetwork, make_trace
from .walks import check_budget, pick_start_minute

MAX_TABLE_ENTRIES = 50_000_000


class GeneratorPolicy:
    def __init__(self, station_ids: Sequence[str], order: int = 1, temperature: float = 1.0,
                 table: np.ndarray | None = None, start_counts: np.ndarray | None = None):
        if order < 0:
            raise ValueError("order must be >= 0")
        if not temperature > 0:
            raise ValueError("temperature must be positive")
        self.station_ids = tuple(station_ids)
        self.order = int(order)
        self.temperature = float(temperature)
        s = len(self.station_ids)
        n_hist = (s + 1) ** self.order
        if n_hist * N_SLOTS * s > MAX_TABLE_ENTRIES:
            raise ValueError(f"order {order} is too large for a tabular policy over {s} stations")
        self.table = np.zeros((n_hist, N_SLOTS, s)) if table is None else np.array(table, float)
        if self.table.shape != (n_hist, N_SLOTS, s):
            raise ValueError(f"logit table has shape {self.table.shape}, expected {(n_hist, N_SLOTS, s)}")
        self.start_counts = np.zeros(N_SLOTS) if start_counts is None else np.array(start_counts, float)

    @property
    def n_stations(self) -> int:
        return len(self.station_ids)

    def copy(self) -> GeneratorPolicy:
        return GeneratorPolicy(self.station_ids, self.order, self.temperature, self.table.copy(),
                               self.start_counts.copy())

    def history_index(self, history: Sequence[int]) -> int:
        """Encode the last ``order`` station indices (padding with the start marker)."""
        s = self.n_stations
        h = list(history[len(history) - self.order:]) if self.order else []
        h = [s] * (self.order - len(h)) + h
        idx = 0
        for x in h:
            idx = idx * (s + 1) + x
        return idx

    def decode_history(self, idx: int) -> tuple[str | None, ...]:
        s = self.n_stations
        out = []
        for _ in range(self.order):
            idx, x = divmod(idx, s + 1)
            out.append(None if x == s else self.station_ids[x])
        return tuple(reversed(out))

    def key(self, history: Sequence[int], slot_index: int) -> tuple[int, int]:
        return self.history_index(history), slot_index

    def row(self, key: tuple[int, int]) -> np.ndarray:
        return self.table[key]

    @property
    def logits(self) -> dict[tuple[tuple[str | None, ...], TimeSlot], np.ndarray]:
        """Non-zero rows as a mapping (history of station ids, slot) -> logit vector."""
        hs, slots = np.nonzero(np.any(self.table != 0, axis=2))
        return {(self.decode_history(h), TimeSlot.from_index(j)): self.table[h, j]
                for h, j in zip(hs.tolist(), slots.tolist())}

    def probs(self, key: tuple[int, int], mask: np.ndarray | None = None) -> np.ndarray:
        return masked_softmax(self.row(key)[None, :] / self.temperature,
                              None if mask is None else mask[None, :])[0]

    # ------------------------------------------------------------------
    # sampling

    def begin(self, tvn: TimeVaryingNetwork, budget: float, rng: np.random.Generator,
              day_types: Sequence[str]) -> Rollouts:
        """Fresh shifts, one per entry of ``day_types``, with start hours from ``start_counts``."""
        starts = []
        for dt in day_types:
            d = DAY_TYPES.index(dt)
            starts.append(pick_start_minute(self.start_counts[d * 24:(d + 1) * 24], budget, rng))
        return Rollouts.fresh(tvn, budget, day_types, starts)

    def run(self, tvn: TimeVaryingNetwork, batch: Rollouts, rng: np.random.Generator,
            record: list | None = None) -> Rollouts:
        """Advance every shift in ``batch`` until nothing more fits its budget.

        With ``record`` given, each lockstep step appends
        ``(rows, positions, history_idx, slot_idx, probs, choice)``.
        """
        dist, dwell = tvn.network.distance, tvn.network.dwell
        s = self.n_stations
        active = batch.length < batch.stations.shape[1]
        while True:
            rows = np.flatnonzero(active)
            if rows.size == 0:
                return batch
            pos = batch.length[rows]
            cur = np.where(pos > 0, batch.stations[rows, np.maximum(pos - 1, 0)], -1)
            travel = np.where((cur >= 0)[:, None], dist[np.maximum(cur, 0)], 0.0)
            mask = (batch.spent[rows, None] + travel) + dwell[None, :] <= batch.budget
            live = mask.any(axis=1)
            active[rows[~live]] = False
            if not live.all():
                rows, pos, travel, mask = rows[live], pos[live], travel[live], mask[live]
                if rows.size == 0:
                    return batch

            hist = np.zeros(rows.size, dtype=np.int64)
            for j in range(self.order, 0, -1):
                p = pos - j
                tok = np.where(p >= 0, batch.stations[rows, np.maximum(p, 0)], s)
                hist = hist * (s + 1) + tok
            slot = batch.day_base[rows] + (batch.t[rows] // 60).astype(np.int64) % 24
            probs = masked_softmax(self.table[hist, slot] / self.temperature, mask)
            choice = sample_rows(probs, rng)
            if record is not None:
                record.append((rows, pos, hist, slot, probs, choice))
            leg = travel[np.arange(rows.size), choice]
            batch.arrivals[rows, pos] = batch.t[rows] + leg
            batch.t[rows] = (batch.t[rows] + leg) + dwell[choice]
            batch.spent[rows] = (batch.spent[rows] + leg) + dwell[choice]
            batch.stations[rows, pos] = choice
            batch.t_hist[rows, pos] = batch.t[rows]
            batch.spent_hist[rows, pos] = batch.spent[rows]
            batch.length[rows] = pos + 1
            active[rows[pos + 1 >= batch.stations.shape[1]]] = False

    def rollout(self, tvn: TimeVaryingNetwork, budget: float, rng: np.random.Generator,
                day_type: str = "WD") -> Rollouts:
        check_budget(tvn, budget)
        return self.run(tvn, self.begin(tvn, budget, rng, [day_type]), rng)

    def sample_traces(self, tvn: TimeVaryingNetwork, budget: float, rng: np.random.Generator,
                      day_types: Sequence[str], prefix: str = "g") -> list[ControlTrace]:
        check_budget(tvn, budget)
        batch = self.run(tvn, self.begin(tvn, budget, rng, day_types), rng)
        return [batch.trace(tvn, r, f"{prefix}{r:05d}") for r in range(len(day_types))]


def masked_softmax(z: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    if mask is not None:
        z = np.where(mask, z, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    p = np.exp(z)
    return p / p.sum(axis=1, keepdims=True)


def sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row, one uniform per row."""
    c = np.cumsum(probs, axis=1)
    u = rng.random(len(probs))[:, None] * c[:, -1:]
    choice = np.minimum((c <= u).sum(axis=1), probs.shape[1] - 1)
    bad = probs[np.arange(len(probs)), choice] == 0
    if bad.any():
        choice[bad] = probs[bad].argmax(axis=1)
    return choice


@dataclass(eq=False)
class Rollouts:
    """Lockstep batch of partially built shifts (row r = one controller shift)."""

    budget: float
    day_type: list[str]
    day_base: np.ndarray     # (R,) first slot index of each row's day type
    start: np.ndarray        # (R,) shift start, minutes since midnight
    t: np.ndarray            # (R,) clock after the last visit
    spent: np.ndarray        # (R,) minutes used, accumulated exactly like trace_cost
    stations: np.ndarray     # (R, M) station indices, -1 past ``length``
    arrivals: np.ndarray     # (R, M)
    t_hist: np.ndarray       # (R, M) clock after each visit
    spent_hist: np.ndarray   # (R, M) spent after each visit
    length: np.ndarray       # (R,)

    @classmethod
    def fresh(cls, tvn: TimeVaryingNetwork, budget: float, day_types: Sequence[str],
              starts: Sequence[float]) -> Rollouts:
        r = len(day_types)
        m = int(budget // tvn.network.dwell.min()) + 1
        starts = np.asarray(starts, dtype=float)
        return cls(float(budget), list(day_types),
                   np.array([DAY_TYPES.index(d) * 24 for d in day_types], dtype=np.int64),
                   starts.copy(), starts.copy(), np.zeros(r), np.full((r, m), -1, dtype=np.int64),
                   np.zeros((r, m)), np.zeros((r, m)), np.zeros((r, m)), np.zeros(r, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.length)

    def prefixes(self, rows: np.ndarray, lengths: np.ndarray) -> Rollouts:
        """New batch holding row ``rows[i]`` truncated to its first ``lengths[i]`` visits."""
        rows = np.asarray(rows)
        lengths = np.asarray(lengths)
        stations = self.stations[rows].copy()
        stations[np.arange(stations.shape[1])[None, :] >= lengths[:, None]] = -1
        last = np.maximum(lengths - 1, 0)
        has = lengths > 0
        t = np.where(has, self.t_hist[rows, last], self.start[rows])
        spent = np.where(has, self.spent_hist[rows, last], 0.0)
        return Rollouts(self.budget, [self.day_type[r] for r in rows], self.day_base[rows].copy(),
                        self.start[rows].copy(), t, spent, stations, self.arrivals[rows].copy(),
                        self.t_hist[rows].copy(), self.spent_hist[rows].copy(), lengths.copy())

    def station_list(self, r: int) -> list[int]:
        return self.stations[r, :self.length[r]].tolist()

    def trace(self, tvn: TimeVaryingNetwork, r: int, controller_id: str) -> ControlTrace:
        ids = tvn.network.ids
        return make_trace(tvn, controller_id, [ids[i] for i in self.station_list(r)],
                          float(self.start[r]), self.day_type[r])


# --------------------------------------------------------------------------
# maximum-likelihood pretraining
# --------------------------------------------------------------------------

def _decisions(policy: GeneratorPolicy, traces: Sequence[ControlTrace]):
    """(history index, slot index, action) for every visit, replaying decision-time slots."""
    index = {s: i for i, s in enumerate(policy.station_ids)}
    out = []
    for t in traces:
        hist: list[int] = []
        now = t.visits[0].arrive_min if t.visits else 0.0
        for v in t.visits:
            a = index[v.station_id]
            out.append((policy.history_index(hist), TimeSlot.at(v.slot.day_type, now).index, a))
            hist.append(a)
            now = v.depart_min
    return out


def sequence_nll(policy: GeneratorPolicy, traces: Sequence[ControlTrace]) -> float:
    """Mean per-step negative log-likelihood (unmasked softmax)."""
    steps = _decisions(policy, traces)
    if not steps:
        raise EmptyBatch("no transitions to score")
    h, j, a = (np.array(x) for x in zip(*steps))
    p = masked_softmax(policy.table[h, j] / policy.temperature, None)
    return float(-np.log(p[np.arange(len(a)), a]).mean())


def pretrain_policy(policy: GeneratorPolicy, sequences: Sequence[ControlTrace], config,
                    nll_trace: list | None = None) -> GeneratorPolicy:
    """Full-batch gradient descent on per-step negative log-likelihood.

    Each table row steps along the mean gradient of its own transitions.
    Rows are independent convex problems with curvature at most 1/(2 T^2),
    so any learning rate below 4 T^2 (T = temperature) keeps the NLL
    non-increasing. ``nll_trace`` receives the NLL before training and after
    every epoch. Shift start hours are re-estimated from the sequences.
    """
    if not sequences or not any(t.visits for t in sequences):
        raise EmptyBatch("pretraining needs at least one non-empty sequence")
    out = policy.copy()
    for t in sequences:
        if t.visits:
            out.start_counts[TimeSlot.at(t.day_type, t.visits[0].arrive_min).index] += 1
    steps = _decisions(out, sequences)
    cells = sorted({(h, j) for h, j, _ in steps})
    cell_of = {c: n for n, c in enumerate(cells)}
    rows = np.array([cell_of[(h, j)] for h, j, _ in steps])
    acts = np.array([a for _, _, a in steps])
    hs = np.array([h for h, _ in cells])
    js = np.array([j for _, j in cells])
    z = out.table[hs, js].copy()
    per_row = np.bincount(rows, minlength=len(cells)).astype(float)[:, None]
    tau = out.temperature
    lr = float(getattr(config, "pretrain_learning_rate", 1.0))
    ar = np.arange(len(steps))

    def nll_and_grad(z):
        logits = z[rows] / tau
        logits = logits - logits.max(axis=1, keepdims=True)
        logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
        g = np.exp(logp)
        g[ar, acts] -= 1.0
        grad = np.zeros_like(z)
        np.add.at(grad, rows, g / tau)
        return -logp[ar, acts].mean(), grad / per_row

    nll, grad = nll_and_grad(z)
    if nll_trace is not None:
        nll_trace.append(float(nll))
    for _ in range(int(config.pretrain_epochs)):
        z = z - lr * grad
        nll, grad = nll_and_grad(z)
        if nll_trace is not None:
            nll_trace.append(float(nll))
    out.table[hs, js] = z
    return out
