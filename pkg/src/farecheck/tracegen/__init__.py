"""Budget-constrained control-trace generation."""

from .discriminator import Discriminator, feature_dim, trace_features
from .gan import (
    TrainingConfig,
    generate_periods,
    generate_schedule,
    group_periods,
    load_model,
    save_model,
    train_gan,
)
from .policy import GeneratorPolicy, pretrain_policy, sequence_nll
from .target import TargetDistribution, make_target
from .walks import derive_training_sequences, greedy_improve, sample_baseline

__all__ = [
    "Discriminator",
    "GeneratorPolicy",
    "TargetDistribution",
    "TrainingConfig",
    "derive_training_sequences",
    "feature_dim",
    "generate_periods",
    "generate_schedule",
    "greedy_improve",
    "group_periods",
    "load_model",
    "make_target",
    "pretrain_policy",
    "sample_baseline",
    "save_model",
    "sequence_nll",
    "trace_features",
    "train_gan",
]
