"""Adversarial training of the generator policy and schedule generation.

The generator is updated by REINFORCE with the discriminator's score as the
episodic reward. Intermediate steps are credited with the mean score of
``rollouts`` Monte-Carlo completions of the prefix, the final step with the
score of the finished trace. The discriminator is a logistic regression on
real vs generated trace features.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import IO

import numpy as np

from ..errors import EmptyBatch, NonFiniteLoss, ParseError
from ..ingest import network_from_dict, network_to_dict
from ..network import (
    DAY_TYPES,
    ControlTrace,
    RidershipProfile,
    TimeSlot,
    TimeVaryingNetwork,
    day_type_of,
)
from .discriminator import FEATURE_VERSION, Discriminator, array_features, feature_matrix
from .policy import GeneratorPolicy, Rollouts
from .walks import check_budget

MODEL_FORMAT = "farecheck-model"


@dataclass(frozen=True)
class TrainingConfig:
    pretrain_epochs: int = 200
    gan_epochs: int = 300
    batch_size: int = 16
    rollouts: int = 8
    learning_rate: float = 0.01           # generator policy-gradient step
    disc_learning_rate: float = 0.1
    pretrain_learning_rate: float = 1.0
    disc_steps: int = 1
    n_real: int = 200
    order: int = 1
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("pretrain_epochs", "gan_epochs", "n_real", "order", "disc_steps"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("batch_size", "rollouts"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("learning_rate", "disc_learning_rate", "pretrain_learning_rate", "temperature"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    disc_accuracy: float
    mean_reward: float
    disc_loss: float


def rollout_features(tvn: TimeVaryingNetwork, batch: Rollouts) -> np.ndarray:
    """Features of every row of a finished rollout batch (agrees with trace_features)."""
    hours = (batch.arrivals // 60).astype(np.int64) % 24
    stations = np.maximum(batch.stations, 0)
    return array_features(tvn, stations, hours, batch.length, batch.day_base, batch.spent)


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------

def _day_type_sampler(real):
    counts = Counter(t.day_type for t in real if t.visits)
    kinds = sorted(counts, key=DAY_TYPES.index)
    p = np.array([counts[k] for k in kinds], dtype=float)
    p /= p.sum()
    return lambda rng, n: [kinds[i] for i in rng.choice(len(kinds), size=n, p=p)]


def train_gan(policy: GeneratorPolicy, disc: Discriminator, real: list[ControlTrace],
              tvn: TimeVaryingNetwork, budget: float, config: TrainingConfig,
              rng: np.random.Generator, audit=None):
    """Alternate policy-gradient and discriminator updates for ``config.gan_epochs``.

    Returns ``(policy, discriminator, history)``. ``audit``, if given, is called
    with every finished :class:`Rollouts` batch, generated and Monte-Carlo alike.
    """
    if config.gan_epochs == 0:
        return policy, disc, []
    check_budget(tvn, budget)
    real = [t for t in real if t.visits]
    if not real:
        raise EmptyBatch("adversarial training needs real sequences")
    pol, d = policy.copy(), disc.copy()
    real_f = feature_matrix(tvn, real)
    day_types = _day_type_sampler(real)
    tau = pol.temperature
    B, N = config.batch_size, config.rollouts
    step = config.learning_rate / B
    history = []

    for epoch in range(config.gan_epochs):
        record: list = []
        batch = pol.run(tvn, pol.begin(tvn, budget, rng, day_types(rng, B)), rng, record)
        if audit is not None:
            audit(batch)
        fake_f = rollout_features(tvn, batch)
        final = d.score(fake_f)
        lengths = batch.length

        # reward of step j of trace b: mean score of N completions of its first j+1 visits
        rewards = np.zeros(batch.stations.shape)
        rewards[np.arange(B), np.maximum(lengths - 1, 0)] = final
        inner = np.maximum(lengths - 1, 0)
        src = np.repeat(np.arange(B), inner)
        plen = np.concatenate([np.arange(1, n + 1) for n in inner]) if inner.sum() else np.zeros(0, int)
        if src.size:
            mc = batch.prefixes(np.repeat(src, N), np.repeat(plen, N))
            pol.run(tvn, mc, rng)
            if audit is not None:
                audit(mc)
            rewards[src, plen - 1] = np.asarray(d.score(rollout_features(tvn, mc))).reshape(-1, N).mean(axis=1)
        valid = np.arange(rewards.shape[1])[None, :] < lengths[:, None]
        baseline = float(rewards[valid].mean()) if valid.any() else 0.0

        touched = []
        for rows, pos, hist, slot, probs, choice in record:
            g = -probs
            g[np.arange(len(rows)), choice] += 1.0
            g *= ((rewards[rows, pos] - baseline) / tau)[:, None]
            np.add.at(pol.table, (hist, slot), step * g)
            touched.append((hist, slot))

        pick = rng.choice(len(real_f), size=min(B, len(real_f)), replace=False)
        acc = d.accuracy(real_f[pick], fake_f)
        loss = d.fit(real_f[pick], fake_f, config.disc_learning_rate, config.disc_steps)
        mean_reward = float(np.mean(final))

        if not (math.isfinite(loss) and np.all(np.isfinite(d.weights)) and math.isfinite(d.bias)):
            raise NonFiniteLoss(f"epoch {epoch}: discriminator diverged (loss={loss})")
        for hist, slot in touched:
            if not np.all(np.isfinite(pol.table[hist, slot])):
                raise NonFiniteLoss(f"epoch {epoch}: non-finite generator logits")
        history.append(EpochStats(epoch, acc, mean_reward, loss))
    return pol, d, history


def heldout_accuracy(disc: Discriminator, real: list[ControlTrace], fake: list[ControlTrace],
                     tvn: TimeVaryingNetwork) -> float:
    return disc.accuracy(feature_matrix(tvn, real), feature_matrix(tvn, fake))


# --------------------------------------------------------------------------
# schedules
# --------------------------------------------------------------------------

def generate_schedule(policy: GeneratorPolicy, tvn: TimeVaryingNetwork, budget: float,
                      n_controllers: int, rng: np.random.Generator, day_type: str = "WD",
                      period: int = 0) -> list[ControlTrace]:
    """``n_controllers`` independent policy rollouts for one period.

    Each controller draws from its own child stream of ``rng``, so results do
    not depend on the order rollouts are evaluated in.
    """
    check_budget(tvn, budget)
    if n_controllers <= 0:
        return []
    out = []
    for c, child in enumerate(rng.spawn(n_controllers)):
        batch = policy.rollout(tvn, budget, child, day_type)
        out.append(batch.trace(tvn, 0, f"d{period:03d}/c{c:03d}"))
    return out


def generate_periods(policy: GeneratorPolicy, tvn: TimeVaryingNetwork, budget: float,
                     n_controllers: int, n_periods: int, rng: np.random.Generator,
                     first_weekday: int = 0) -> list[list[ControlTrace]]:
    """Consecutive daily schedules; the day type follows the calendar from ``first_weekday``."""
    check_budget(tvn, budget)
    return [
        generate_schedule(policy, tvn, budget, n_controllers, child,
                          day_type_of((first_weekday + p) % 7), p)
        for p, child in enumerate(rng.spawn(n_periods))
    ]


def period_of(trace: ControlTrace) -> str:
    """Period label encoded in a generated controller id (``d003/c012`` -> ``d003``)."""
    return trace.controller_id.split("/", 1)[0] if "/" in trace.controller_id else trace.controller_id


def group_periods(traces: list[ControlTrace]) -> list[list[ControlTrace]]:
    groups: dict[str, list[ControlTrace]] = {}
    for t in traces:
        groups.setdefault(period_of(t), []).append(t)
    return [groups[k] for k in sorted(groups)]


# --------------------------------------------------------------------------
# model.json
# --------------------------------------------------------------------------

def _key_str(policy: GeneratorPolicy, hist: int, slot: int) -> str:
    names = ["^" if h is None else h for h in policy.decode_history(hist)]
    return ",".join(names) + "@" + str(slot)


def _key_parse(policy: GeneratorPolicy, text: str) -> tuple[int, int]:
    hist, slot = text.rsplit("@", 1)
    index = {s: i for i, s in enumerate(policy.station_ids)}
    parts = [p for p in hist.split(",") if p]
    if len(parts) != policy.order:
        raise ParseError(f"logit key {text!r} does not match order {policy.order}", field="logits")
    s = policy.n_stations
    return policy.history_index([s if p == "^" else index[p] for p in parts]), int(slot)


def model_to_dict(policy: GeneratorPolicy, disc: Discriminator, tvn: TimeVaryingNetwork,
                  meta: dict | None = None) -> dict:
    return {
        "format": MODEL_FORMAT,
        "feature_version": disc.version,
        "policy": {
            "order": policy.order,
            "temperature": policy.temperature,
            "station_ids": list(policy.station_ids),
            "start_counts": [float(x) for x in policy.start_counts],
            "logits": {_key_str(policy, h, j): [float(x) for x in policy.table[h, j]]
                       for h, j in zip(*map(np.ndarray.tolist,
                                             np.nonzero(np.any(policy.table != 0, axis=2))))},
        },
        "discriminator": {"weights": [float(x) for x in disc.weights], "bias": float(disc.bias)},
        "network": network_to_dict(tvn.network),
        "ridership": [
            [sid, slot.day_type, slot.hour, float(v)]
            for (sid, slot), v in sorted(tvn.ridership.counts.items(),
                                         key=lambda kv: (kv[0][0], kv[0][1].index))
        ],
        "meta": meta or {},
    }


def model_from_dict(doc: dict):
    """Inverse of :func:`model_to_dict`: ``(policy, discriminator, tvn, meta)``."""
    if doc.get("format") != MODEL_FORMAT:
        raise ParseError("not a farecheck model file", field="format")
    if doc.get("feature_version") != FEATURE_VERSION:
        raise ParseError(f"unsupported feature version {doc.get('feature_version')}",
                         field="feature_version")
    p = doc["policy"]
    policy = GeneratorPolicy(tuple(p["station_ids"]), int(p["order"]), float(p["temperature"]))
    policy.start_counts = np.array(p["start_counts"], dtype=float)
    for k, v in p["logits"].items():
        policy.table[_key_parse(policy, k)] = np.array(v, dtype=float)
    d = doc["discriminator"]
    disc = Discriminator(np.array(d["weights"], dtype=float), float(d["bias"]))
    net = network_from_dict(doc["network"])
    counts = {(sid, TimeSlot(dt, int(h))): float(v) for sid, dt, h, v in doc["ridership"]}
    tvn = TimeVaryingNetwork(net, RidershipProfile(counts))
    return policy, disc, tvn, doc.get("meta", {})


def save_model(stream: IO[str], policy, disc, tvn, meta=None) -> None:
    json.dump(model_to_dict(policy, disc, tvn, meta), stream, indent=1)
    stream.write("\n")


def load_model(stream: IO[str]):
    try:
        doc = json.load(stream)
    except json.JSONDecodeError as e:
        raise ParseError(f"model is not valid JSON: {e.msg}", line=e.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("model must be a JSON object")
    try:
        return model_from_dict(doc)
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed model file: {e!r}") from None


def config_dict(config: TrainingConfig) -> dict:
    return asdict(config)

