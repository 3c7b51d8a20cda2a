"""64-channel 10-20 montage: canonical channel names and flat head-disc coordinates.

Coordinates follow the usual equal-angle projection of the scalp onto the
unit disc: the vertex (Cz) sits at the origin, the nose points toward +y,
and the outer 10% ring of electrodes lies on a circle of radius 0.82.
Left-hemisphere electrodes have x < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Waveguard-style 64-channel gel cap layout (10-20 extended names).
CHANNELS_64: tuple[str, ...] = (
    "Fp1", "Fpz", "Fp2", "F7", "F3", "Fz", "F4", "F8", "FC5", "FC1",
    "FC2", "FC6", "M1", "T7", "C3", "Cz", "C4", "T8", "M2", "CP5",
    "CP1", "CP2", "CP6", "P7", "P3", "Pz", "P4", "P8", "POz", "O1",
    "Oz", "O2", "AF7", "AF3", "AF4", "AF8", "F5", "F1", "F2", "F6",
    "FC3", "FCz", "FC4", "C5", "C1", "C2", "C6", "CP3", "CPz", "CP4",
    "P5", "P1", "P2", "P6", "PO5", "PO3", "PO4", "PO6", "FT7", "FT8",
    "TP7", "TP8", "PO7", "PO8",
)

IMPEDANCE_LIMIT_KOHM = 20.0

# Azimuth (degrees from nose, positive to the right) of each row's outer-ring
# electrode, and the eccentricity of the row's midline electrode.
_RING_ANGLE = {"Fp": 18.0, "AF": 36.0, "F": 54.0, "FC": 72.0, "C": 90.0,
               "CP": 108.0, "P": 126.0, "PO": 144.0, "O": 162.0}
_MID_ECC = {"Fp": 0.82, "AF": 0.615, "F": 0.41, "FC": 0.205, "C": 0.0,
            "CP": 0.205, "P": 0.41, "PO": 0.615, "O": 0.82}
_RING_ECC = 0.82

# Ring-row aliases: T7/T8 sit on the C row, FT7/FT8 on the FC row, TP7/TP8 on CP.
_ALIAS_ROW = {"T": "C", "FT": "FC", "TP": "CP"}


def _column_offset(row: str, col: str) -> float:
    """Signed lateral position t in [-1, 1] (negative = left hemisphere)."""
    if col == "z":
        return 0.0
    n = int(col)
    side = -1.0 if n % 2 == 1 else 1.0
    if row in ("Fp", "O"):
        # Fp1/Fp2 and O1/O2 are outer-ring electrodes despite their low index.
        return side
    return side * {1: 0.25, 3: 0.5, 5: 0.75, 7: 1.0}[n if n % 2 == 1 else n - 1]


def _position(name: str) -> tuple[float, float]:
    if name == "M1":
        return (0.95 * math.sin(math.radians(-115.0)), 0.95 * math.cos(math.radians(-115.0)))
    if name == "M2":
        return (0.95 * math.sin(math.radians(115.0)), 0.95 * math.cos(math.radians(115.0)))
    row, col = name[:-1], name[-1]
    if row in _ALIAS_ROW:
        row = _ALIAS_ROW[row]
        t = -1.0 if col in ("1", "3", "5", "7") else 1.0
    else:
        t = _column_offset(row, col)
    ring = _RING_ANGLE[row]
    ecc = _MID_ECC[row] + (_RING_ECC - _MID_ECC[row]) * abs(t)
    if row in ("Fp", "AF", "F", "FC"):
        theta = t * ring
    elif row == "C":
        theta = math.copysign(90.0, t) if t != 0.0 else 0.0
    else:
        # Posterior rows curve around the back of the head.
        theta = 180.0 - (180.0 - ring) * t
    rad = math.radians(theta)
    return (ecc * math.sin(rad), ecc * math.cos(rad))


def coords2d(channels: tuple[str, ...] = CHANNELS_64) -> dict[str, tuple[float, float]]:
    """Flat (x, y) coordinates on the unit head disc for the given channels."""
    return {name: _position(name) for name in channels}


def coords_array(channels: tuple[str, ...]) -> np.ndarray:
    """Coordinates stacked as an (n_channels, 2) array in channel order."""
    table = coords2d(channels)
    return np.array([table[c] for c in channels], dtype=np.float64)


@dataclass(frozen=True)
class MontageMeta:
    """Electrode metadata attached to a recording: placement system,
    per-channel impedances, and 2D head coordinates."""

    channels: tuple[str, ...] = CHANNELS_64
    system: str = "10-20"
    impedance_kohm: tuple[float, ...] | None = None
    coords: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.coords:
            known = {c: _position(c) for c in self.channels if _is_known(c)}
            object.__setattr__(self, "coords", known)


def _is_known(name: str) -> bool:
    return name in CHANNELS_64


@dataclass(frozen=True)
class MontageReport:
    """Validation outcome; data is never mutated, only flagged."""

    impedance_fail: tuple[str, ...]
    unknown_names: tuple[str, ...]
    coords_outside: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not (self.impedance_fail or self.unknown_names or self.coords_outside)


def validate_montage(meta: MontageMeta) -> MontageReport:
    """Flag channels with impedance above the acceptance limit, names outside
    the 10-20 set, and coordinates outside the unit disc."""
    imp_fail = []
    if meta.impedance_kohm is not None:
        for name, z in zip(meta.channels, meta.impedance_kohm):
            if z > IMPEDANCE_LIMIT_KOHM:
                imp_fail.append(name)
    unknown = [c for c in meta.channels if not _is_known(c)]
    outside = [c for c, (x, y) in meta.coords.items() if x * x + y * y > 1.0 + 1e-12]
    return MontageReport(tuple(imp_fail), tuple(unknown), tuple(outside))
