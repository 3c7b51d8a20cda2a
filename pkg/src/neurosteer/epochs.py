"""Trigger-aligned epoch extraction, outlier pruning, normalization, and the
shuffled train/validation split.

Two overlapping raw windows are cut per trigger (samples 700-1700 and
750-1750 at 512 Hz) and decimated by 2, yielding 500 x 64 epochs. Outlier
pruning drops epochs whose peak absolute amplitude falls below the 10th or
above the 90th percentile of the set. Each surviving epoch is scaled to
zero mean and unit variance over its pooled 500 x 64 values, the only
normalization scope a streaming classifier can reproduce.

Epoch databases are stored in the EPDB container (little-endian): magic
"EPDB" | version u16 | n_epochs u32 | n_steps u16 | n_channels u16, then
per epoch: label u8 | synthetic u8 | trigger_index u32 | window_index u8 |
n_steps*n_channels f32 (time-major).
"""

from __future__ import annotations

import logging
import math
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadMagic,
    ChannelCountMismatch,
    InvalidRecording,
    IoFailure,
    ShapeMismatch,
    TooFewEpochs,
    TruncatedFile,
    VersionUnsupported,
    WindowOutOfBounds,
)
from .recording import LABELS, Recording, TriggerEvent

log = logging.getLogger(__name__)

EPOCH_STEPS = 500
EPOCH_CHANNELS = 64

_EPDB_MAGIC = b"EPDB"
_EPDB_VERSION = 1
_EPDB_HEADER = struct.Struct("<4sHIHH")
_EPDB_RECORD = struct.Struct("<BBIB")

_SPLIT_SALT = 7919


@dataclass(frozen=True)
class WindowSpec:
    """Raw-sample windows cut around each trigger, expressed at the native
    512 Hz rate, plus the decimation that yields the classifier input length."""

    offsets: tuple[tuple[int, int], ...] = ((700, 1700), (750, 1750))
    decimation: int = 2
    out_len: int = EPOCH_STEPS

    def __post_init__(self):
        if self.decimation < 1:
            raise ValueError("decimation must be a positive integer")
        for start, end in self.offsets:
            if (end - start) % self.decimation or (end - start) // self.decimation != self.out_len:
                raise ValueError(
                    f"window ({start},{end}) with decimation {self.decimation} "
                    f"does not produce {self.out_len} steps"
                )

    @property
    def max_end(self) -> int:
        return max(end for _, end in self.offsets)


@dataclass(frozen=True)
class Epoch:
    """One classifier input: out_len x n_channels, labeled, with provenance."""

    data: np.ndarray  # (n_steps, n_channels) float64
    label: int
    source: tuple[int, int]  # (trigger index, window offset index)
    synthetic: bool = False

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ShapeMismatch(f"epoch data must be 2D, got shape {data.shape}")
        if not np.isfinite(data).all():
            raise InvalidRecording("epoch contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.label not in (0, 1, 2):
            raise ValueError(f"label {self.label} not in {{0,1,2}}")


@dataclass(frozen=True)
class EpochSet:
    """An ordered collection of epochs; ordering is deterministic given the
    seeds used to produce it."""

    epochs: tuple[Epoch, ...]

    def __len__(self) -> int:
        return len(self.epochs)

    def __iter__(self):
        return iter(self.epochs)

    def __getitem__(self, i: int) -> Epoch:
        return self.epochs[i]

    @property
    def class_counts(self) -> Counter:
        return Counter(e.label for e in self.epochs)

    @property
    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.epochs], dtype=np.int64)

    def stack(self) -> np.ndarray:
        """All epochs as one (n, n_steps, n_channels) float64 array."""
        return np.stack([e.data for e in self.epochs]) if self.epochs else \
            np.empty((0, EPOCH_STEPS, EPOCH_CHANNELS))


def extract_epochs(rec: Recording, triggers: Sequence[TriggerEvent],
                   spec: WindowSpec = WindowSpec()) -> EpochSet:
    """Cut every window of `spec` around every trigger and decimate.

    Keeps every `decimation`-th sample starting at the window start; both
    windows of a trigger carry its label.
    """
    if rec.n_channels != EPOCH_CHANNELS:
        raise ChannelCountMismatch(
            f"expected {EPOCH_CHANNELS} channels, recording has {rec.n_channels}"
        )
    out = []
    for ti, trig in enumerate(triggers):
        if trig.sample_index + spec.max_end > rec.n_samples:
            raise WindowOutOfBounds(
                f"trigger {ti} at sample {trig.sample_index} needs "
                f"{trig.sample_index + spec.max_end} samples, recording has {rec.n_samples}"
            )
        for wi, (start, end) in enumerate(spec.offsets):
            a = trig.sample_index + start
            b = trig.sample_index + end
            window = rec.data[:, a:b:spec.decimation].T.copy()
            out.append(Epoch(window, trig.label, source=(ti, wi)))
    return EpochSet(tuple(out))


def _peak_statistic(eset: EpochSet) -> np.ndarray:
    return np.array([np.abs(e.data).max() for e in eset], dtype=np.float64)


def reject_outliers(eset: EpochSet, p_low: float = 10.0, p_high: float = 90.0) -> EpochSet:
    """Drop epochs whose peak |amplitude| falls outside [P10, P90] of the set.

    Percentiles use linear interpolation over the sorted statistics. A class
    is never eliminated entirely: if all its epochs would go, its largest-peak
    member is retained and the retention is logged.
    """
    if len(eset) < 10:
        raise TooFewEpochs(f"need at least 10 epochs to prune outliers, got {len(eset)}")
    stats = _peak_statistic(eset)
    lo = np.percentile(stats, p_low)
    hi = np.percentile(stats, p_high)
    keep = (stats >= lo) & (stats <= hi)
    for label in sorted(set(e.label for e in eset)):
        members = np.array([e.label == label for e in eset])
        if not (keep & members).any():
            survivor = int(np.flatnonzero(members)[np.argmax(stats[members])])
            keep[survivor] = True
            log.warning(
                "outlier pruning would remove every '%s' epoch; retained epoch %d",
                LABELS[label], survivor,
            )
    return EpochSet(tuple(e for e, k in zip(eset, keep) if k))


def normalize_block(data: np.ndarray) -> np.ndarray:
    """Zero-mean/unit-variance scaling of one epoch's pooled values
    (population variance); constant blocks map to all zeros. Shared by the
    offline pipeline and the streaming classifier so both paths produce
    bit-identical inputs."""
    mean = data.mean()
    std = data.std()
    if std == 0.0:
        return np.zeros_like(data)
    return (data - mean) / std


def normalize(eset: EpochSet) -> EpochSet:
    """Scale each epoch to zero mean, unit population variance over its
    pooled values; constant epochs map to all zeros."""
    if len(eset) == 0:
        raise TooFewEpochs("cannot normalize an empty epoch set")
    out = [Epoch(normalize_block(e.data), e.label, e.source, e.synthetic) for e in eset]
    return EpochSet(tuple(out))


def split_shuffle(eset: EpochSet, train_frac: float = 0.7, seed: int = 0,
                  grouped: bool = True) -> tuple[EpochSet, EpochSet]:
    """Deterministic shuffled split into train/validation.

    With grouped=True all windows cut from the same trigger stay in the same
    partition (no leakage between overlapping windows); the train partition
    is the shortest group-aligned prefix reaching floor(train_frac * n), so
    it is exact whenever group sizes allow. grouped=False restores a plain
    epoch-level shuffle with an exact floor split.
    """
    n = len(eset)
    if n < 4:
        raise TooFewEpochs(f"need at least 4 epochs to split, got {n}")
    target = math.floor(train_frac * n)
    rng = np.random.default_rng([seed, _SPLIT_SALT])
    if grouped:
        keys: list[int] = []
        members: dict[int, list[int]] = {}
        for i, e in enumerate(eset):
            g = e.source[0]
            if g not in members:
                members[g] = []
                keys.append(g)
            members[g].append(i)
        order = rng.permutation(len(keys))
        train_idx: list[int] = []
        val_idx: list[int] = []
        for ki in order:
            group = members[keys[ki]]
            if len(train_idx) < target:
                train_idx.extend(group)
            else:
                val_idx.extend(group)
    else:
        perm = rng.permutation(n)
        train_idx = list(perm[:target])
        val_idx = list(perm[target:])
    train = EpochSet(tuple(eset[i] for i in train_idx))
    val = EpochSet(tuple(eset[i] for i in val_idx))
    return train, val


def save_epochs(eset: EpochSet, path: str | Path) -> None:
    """Write an epoch database (EPDB). Values are narrowed to float32."""
    if len(eset) == 0:
        raise TooFewEpochs("refusing to write an empty epoch database")
    steps, channels = eset[0].data.shape
    buf = bytearray()
    buf += _EPDB_HEADER.pack(_EPDB_MAGIC, _EPDB_VERSION, len(eset), steps, channels)
    for e in eset:
        if e.data.shape != (steps, channels):
            raise ShapeMismatch("all epochs in a database must share one shape")
        buf += _EPDB_RECORD.pack(e.label, int(e.synthetic), e.source[0], e.source[1])
        buf += np.ascontiguousarray(e.data, dtype="<f4").tobytes()
    try:
        Path(path).write_bytes(bytes(buf))
    except OSError as exc:
        raise IoFailure(f"failed to write {path}: {exc}") from exc


def load_epochs(path: str | Path) -> EpochSet:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"failed to read {path}: {exc}") from exc
    if len(raw) < _EPDB_HEADER.size:
        raise TruncatedFile("file shorter than the EPDB header", offset=len(raw))
    magic, version, n_epochs, steps, channels = _EPDB_HEADER.unpack_from(raw)
    if magic != _EPDB_MAGIC:
        raise BadMagic(f"expected {_EPDB_MAGIC!r}, found {magic!r}", offset=0)
    if version != _EPDB_VERSION:
        raise VersionUnsupported(f"EPDB version {version} not supported", offset=4)
    record_bytes = _EPDB_RECORD.size + 4 * steps * channels
    need = _EPDB_HEADER.size + n_epochs * record_bytes
    if len(raw) < need:
        raise TruncatedFile(f"expected {need} bytes, file has {len(raw)}", offset=len(raw))
    epochs = []
    off = _EPDB_HEADER.size
    for _ in range(n_epochs):
        label, synthetic, trig_idx, win_idx = _EPDB_RECORD.unpack_from(raw, off)
        off += _EPDB_RECORD.size
        flat = np.frombuffer(raw, dtype="<f4", count=steps * channels, offset=off)
        off += 4 * steps * channels
        epochs.append(Epoch(flat.reshape(steps, channels).astype(np.float64),
                            label, (trig_idx, win_idx), bool(synthetic)))
    return EpochSet(tuple(epochs))
