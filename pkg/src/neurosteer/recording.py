"""Core signal types and file I/O.

A recording is stored on disk in the EEGR container (little-endian):

    magic "EEGR" (4 bytes) | version u16 = 1 | n_channels u16 |
    sample_rate u32 | n_samples u64 | n_channels x 8-byte channel names
    (ASCII, space padded) | payload f32, sample-major (all channels of
    sample 0, then sample 1, ...).

Amplitudes are microvolts, kept as float32 on disk (typical amplifier
resolution) and widened to float64 in memory. Trigger events live in a
sidecar CSV ("sample_index,label" per line, no header, LF endings) so a
scenario can be regenerated without rewriting the signal payload.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    BadLabel,
    BadMagic,
    IndexOutOfRange,
    InvalidRecording,
    IoFailure,
    NonFiniteSample,
    TriggerFormatError,
    TruncatedFile,
    UnsortedTriggers,
    VersionUnsupported,
)

MAGIC = b"EEGR"
VERSION = 1
NAME_BYTES = 8
LABELS = ("straight", "left", "right")
STRAIGHT, LEFT, RIGHT = 0, 1, 2

_HEADER = struct.Struct("<4sHHIQ")


class TriggerEvent(NamedTuple):
    """A road-segment start marker: sample index into the recording plus
    the intended class (0 = straight, 1 = left, 2 = right)."""

    sample_index: int
    label: int


@dataclass(frozen=True)
class Recording:
    """Multichannel signal matrix with channel names and sample rate.

    `data` has shape (n_channels, n_samples), float64, and is frozen
    read-only after construction; the instance takes ownership of the
    array passed in.
    """

    channels: tuple[str, ...]
    sample_rate: int
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(str(c) for c in self.channels))
        if len(set(self.channels)) != len(self.channels):
            raise InvalidRecording("duplicate channel names")
        for name in self.channels:
            if not (1 <= len(name) <= NAME_BYTES) or not name.isascii():
                raise InvalidRecording(f"channel name {name!r} must be 1-8 ASCII characters")
        if int(self.sample_rate) <= 0:
            raise InvalidRecording(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != len(self.channels):
            raise InvalidRecording(
                f"data shape {data.shape} does not match {len(self.channels)} channels"
            )
        if data.size and not np.isfinite(data).all():
            raise InvalidRecording("recording contains non-finite samples")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate

    def channel_index(self, name: str) -> int:
        try:
            return self.channels.index(name)
        except ValueError:
            raise KeyError(f"channel {name!r} not in recording") from None


def save_recording(rec: Recording, path: str | Path) -> None:
    """Write `rec` to an EEGR file. The payload is narrowed to float32."""
    if rec.n_channels == 0:
        raise InvalidRecording("cannot save a recording with no channels")
    header = _HEADER.pack(MAGIC, VERSION, rec.n_channels, rec.sample_rate, rec.n_samples)
    names = b"".join(name.encode("ascii").ljust(NAME_BYTES) for name in rec.channels)
    payload = np.ascontiguousarray(rec.data.T, dtype="<f4")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(names)
            fh.write(payload.tobytes())
    except OSError as exc:
        raise IoFailure(f"failed to write {path}: {exc}") from exc


def load_recording(path: str | Path) -> Recording:
    """Read an EEGR file; inverse of save_recording (bit-exact on the payload)."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"failed to read {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise TruncatedFile("file shorter than the fixed header", offset=len(raw))
    magic, version, n_channels, sample_rate, n_samples = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, found {magic!r}", offset=0)
    if version != VERSION:
        raise VersionUnsupported(f"version {version} not supported", offset=4)
    names_end = _HEADER.size + NAME_BYTES * n_channels
    if len(raw) < names_end:
        raise TruncatedFile("channel name table incomplete", offset=len(raw))
    channels = tuple(
        raw[_HEADER.size + i * NAME_BYTES: _HEADER.size + (i + 1) * NAME_BYTES]
        .decode("ascii").rstrip(" ")
        for i in range(n_channels)
    )
    count = n_channels * n_samples
    if len(raw) < names_end + 4 * count:
        raise TruncatedFile(
            f"payload holds {(len(raw) - names_end) // 4} of {count} samples",
            offset=len(raw),
        )
    flat = np.frombuffer(raw, dtype="<f4", count=count, offset=names_end)
    finite = np.isfinite(flat)
    if not finite.all():
        first = int(np.argmin(finite))
        raise NonFiniteSample("payload contains NaN/Inf", offset=names_end + 4 * first)
    data = flat.reshape(n_samples, n_channels).T.astype(np.float64)
    return Recording(channels=channels, sample_rate=sample_rate, data=data)


def load_triggers(path: str | Path) -> list[TriggerEvent]:
    """Parse a trigger CSV; events must be strictly increasing in sample index."""
    try:
        text = Path(path).read_text(encoding="ascii")
    except OSError as exc:
        raise IoFailure(f"failed to read {path}: {exc}") from exc
    events: list[TriggerEvent] = []
    prev = -1
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TriggerFormatError(f"line {lineno}: expected 'sample_index,label', got {line!r}")
        try:
            idx, label = int(parts[0]), int(parts[1])
        except ValueError:
            raise TriggerFormatError(f"line {lineno}: non-integer field in {line!r}") from None
        if label not in (STRAIGHT, LEFT, RIGHT):
            raise BadLabel(f"line {lineno}: label {label} not in {{0,1,2}}")
        if idx < 0:
            raise IndexOutOfRange(f"line {lineno}: negative sample index {idx}")
        if idx <= prev:
            raise UnsortedTriggers(f"line {lineno}: sample index {idx} not strictly increasing")
        prev = idx
        events.append(TriggerEvent(idx, label))
    return events


def save_triggers(events: Sequence[TriggerEvent], path: str | Path) -> None:
    lines = "".join(f"{e.sample_index},{e.label}\n" for e in events)
    try:
        Path(path).write_text(lines, encoding="ascii", newline="\n")
    except OSError as exc:
        raise IoFailure(f"failed to write {path}: {exc}") from exc


def validate_triggers(events: Sequence[TriggerEvent], rec: Recording) -> None:
    """Check trigger indices against the recording they annotate."""
    for i, e in enumerate(events):
        if e.sample_index >= rec.n_samples:
            raise IndexOutOfRange(
                f"trigger {i} at sample {e.sample_index} beyond recording length {rec.n_samples}"
            )
