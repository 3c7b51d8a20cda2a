"""SMOTE oversampling of minority classes in the training set.

Synthetic epochs are convex combinations x_new = x_i + u * (x_nn - x_i)
with u ~ Uniform(0, 1) and x_nn one of the k nearest same-class neighbors
of x_i under Euclidean distance on the flattened epoch vector. Neighbor
search is exact brute force: training sets stay small enough that the
O(n^2) distances are cheap, and exactness keeps the output deterministic.
Balancing runs only on training data, never on validation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .epochs import Epoch, EpochSet
from .errors import NotEnoughNeighbors, SingleClassInput, TooFewMinoritySamples

_SMOTE_SALT = 104729


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be positive")


class SmoteRecord(NamedTuple):
    """Provenance of one synthetic epoch, as indices into the input set."""

    parent_index: int
    neighbor_index: int
    u: float


def _flatten(eset: EpochSet) -> np.ndarray:
    return eset.stack().reshape(len(eset), -1)


def knn_same_class(eset: EpochSet, index: int, k: int) -> list[int]:
    """Indices of the k nearest same-class neighbors of epoch `index`,
    ascending by distance, ties broken by lower index; the query epoch is
    excluded from its own neighbor list."""
    label = eset[index].label
    candidates = [i for i, e in enumerate(eset) if e.label == label and i != index]
    if len(candidates) < k:
        raise NotEnoughNeighbors(
            f"class {label} has {len(candidates)} other members, need {k}"
        )
    query = eset[index].data.ravel()
    dists = np.array([np.linalg.norm(eset[i].data.ravel() - query) for i in candidates])
    order = np.argsort(dists, kind="stable")[:k]
    return [candidates[i] for i in order]


def smote_balance_records(train: EpochSet, cfg: SmoteConfig = SmoteConfig()
                          ) -> tuple[EpochSet, tuple[SmoteRecord, ...]]:
    """Balance all classes up to the majority count and report how each
    synthetic epoch was built."""
    counts = train.class_counts
    if len(counts) < 2:
        raise SingleClassInput("SMOTE needs at least two classes present")
    majority = max(counts.values())
    for label, n in sorted(counts.items()):
        if n < majority and n <= cfg.k_neighbors:
            raise TooFewMinoritySamples(
                f"class {label} has {n} members, needs more than {cfg.k_neighbors}"
            )

    rng = np.random.default_rng([cfg.seed, _SMOTE_SALT])
    by_class: dict[int, list[int]] = {}
    for i, e in enumerate(train):
        by_class.setdefault(e.label, []).append(i)

    synthetic: list[Epoch] = []
    records: list[SmoteRecord] = []
    for label in sorted(by_class):
        need = majority - counts[label]
        if need == 0:
            continue
        members = by_class[label]
        # Precompute each member's neighbor list once; parents cycle through
        # a seed-shuffled order so coverage is near uniform.
        neighbor_lists = {i: knn_same_class(train, i, cfg.k_neighbors) for i in members}
        parent_order = rng.permutation(len(members))
        for j in range(need):
            parent = members[int(parent_order[j % len(members)])]
            nn = neighbor_lists[parent][int(rng.integers(cfg.k_neighbors))]
            u = float(rng.random())
            base = train[parent]
            data = base.data + u * (train[nn].data - base.data)
            synthetic.append(Epoch(data, label, source=base.source, synthetic=True))
            records.append(SmoteRecord(parent, nn, u))

    merged = list(train.epochs) + synthetic
    order = rng.permutation(len(merged))
    return EpochSet(tuple(merged[i] for i in order)), tuple(records)


def smote_balance(train: EpochSet, cfg: SmoteConfig = SmoteConfig()) -> EpochSet:
    """Balance all classes up to the majority count; original epochs pass
    through bit-identical, the result is reshuffled deterministically."""
    balanced, _ = smote_balance_records(train, cfg)
    return balanced
