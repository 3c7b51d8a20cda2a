"""End-to-end offline pipeline: epochs -> pruning -> normalization -> split
-> SMOTE -> training -> validation metrics.

One master seed drives every stage through fixed salts, so a (recording,
triggers, config) triple maps to exactly one result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .balance import SmoteConfig, smote_balance
from .cnn import (
    Architecture,
    Model,
    TrainConfig,
    TrainHistory,
    evaluate,
    init_model,
    predict,
    train,
)
from .epochs import EpochSet, WindowSpec, extract_epochs, normalize, reject_outliers, split_shuffle
from .metrics import ClassMetrics, ConfusionMatrix, class_metrics, confusion
from .recording import Recording, TriggerEvent, validate_triggers


@dataclass(frozen=True)
class PipelineConfig:
    window: WindowSpec = WindowSpec()
    arch: Architecture = Architecture()
    p_low: float = 10.0
    p_high: float = 90.0
    train_frac: float = 0.7
    grouped_split: bool = True
    smote_k: int = 5
    epochs: int = 80
    batch_size: int = 32
    learning_rate: float = 2e-5
    seed: int = 0

    def train_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, epochs=self.epochs,
                           batch_size=self.batch_size, seed=self.seed * 4 + 3)


@dataclass(frozen=True)
class PipelineResult:
    train_set: EpochSet        # balanced training partition
    val_set: EpochSet
    model: Model               # snapshot from the best validation epoch
    history: TrainHistory
    cm: ConfusionMatrix
    metrics: ClassMetrics

    @property
    def val_accuracy(self) -> float:
        return self.metrics.accuracy


def prepare_epochs(rec: Recording, triggers: Sequence[TriggerEvent],
                   cfg: PipelineConfig = PipelineConfig()) -> tuple[EpochSet, EpochSet]:
    """Extraction through SMOTE; returns (balanced train set, validation set)."""
    validate_triggers(triggers, rec)
    eset = extract_epochs(rec, triggers, cfg.window)
    eset = reject_outliers(eset, cfg.p_low, cfg.p_high)
    eset = normalize(eset)
    train_set, val_set = split_shuffle(eset, cfg.train_frac, seed=cfg.seed * 4 + 1,
                                       grouped=cfg.grouped_split)
    balanced = smote_balance(train_set, SmoteConfig(cfg.smote_k, seed=cfg.seed * 4 + 2))
    return balanced, val_set


def run_pipeline(rec: Recording, triggers: Sequence[TriggerEvent],
                 cfg: PipelineConfig = PipelineConfig()) -> PipelineResult:
    """Full pipeline on one recording; the returned model is the snapshot
    with peak validation accuracy."""
    balanced, val_set = prepare_epochs(rec, triggers, cfg)
    model = init_model(cfg.arch, seed=cfg.seed * 4)
    best, history = train(model, balanced, val_set, cfg.train_config())
    actual = val_set.labels
    predicted = np.array([predict(best, e.data)[0] for e in val_set], dtype=np.int64)
    cm = confusion(actual, predicted)
    return PipelineResult(balanced, val_set, best, history, cm, class_metrics(cm))


def validation_predictions(result: PipelineResult) -> list[tuple[int, int, int, np.ndarray]]:
    """(trigger index, window index, label, probs) per validation epoch."""
    out = []
    for e in result.val_set:
        label, probs = predict(result.model, e.data)
        out.append((e.source[0], e.source[1], label, probs))
    return out
