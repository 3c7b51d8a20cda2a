"""Visualization-path signal processing.

Zero-phase Butterworth band-pass, common-average reference, baseline
correction, FastICA artifact separation, Welch power spectral density,
band powers, evoked averages, and topographic value maps. Everything is a
pure transform: inputs are never modified.

The classifier path deliberately shares none of this; raw epochs go into
the network untouched, while these operations exist for plots and reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import signal as sp_signal

from .errors import (
    BandOutOfRange,
    EmptyClass,
    MissingCoords,
    MissingPrestim,
    NyquistViolation,
    RankDeficient,
    SignalTooShort,
    SingleChannel,
    UnknownChannel,
    UnstableFilter,
    WindowOutOfBounds,
)
from .montage import coords2d
from .recording import LABELS, Recording, TriggerEvent

# Canonical EEG bands (Hz).
BANDS = {"delta": (0.0, 4.0), "theta": (4.0, 8.0), "alpha": (8.0, 13.0),
         "beta": (13.0, 30.0), "gamma": (30.0, 45.0)}

FRONTAL_EOG_CHANNELS = ("AF7", "AF8", "Fp1", "Fp2")


@dataclass(frozen=True)
class BandpassSpec:
    """4th-order Butterworth run forward-backward (zero phase, effective
    order 8)."""

    lo: float = 0.1
    hi: float = 40.0
    order: int = 4

    def __post_init__(self):
        if not 0.0 < self.lo < self.hi:
            raise ValueError("need 0 < lo < hi")
        if self.order < 1:
            raise ValueError("order must be >= 1")


def bandpass(rec: Recording, spec: BandpassSpec = BandpassSpec()) -> Recording:
    """Zero-phase band-pass each channel; edges are handled by even
    reflection padding of three times the effective filter order."""
    fs = rec.sample_rate
    if spec.hi >= fs / 2:
        raise NyquistViolation(f"upper corner {spec.hi} Hz >= Nyquist {fs / 2} Hz")
    sos = sp_signal.butter(spec.order, [spec.lo, spec.hi], btype="bandpass",
                           fs=fs, output="sos")
    _, poles, _ = sp_signal.sos2zpk(sos)
    if np.abs(poles).max() >= 1.0:
        raise UnstableFilter(f"pole magnitude {np.abs(poles).max():.6f} >= 1")
    padlen = 3 * 2 * spec.order
    if rec.n_samples <= padlen:
        raise SignalTooShort(f"need more than {padlen} samples, got {rec.n_samples}")
    data = sp_signal.sosfiltfilt(sos, rec.data, axis=1, padtype="even", padlen=padlen)
    return Recording(rec.channels, rec.sample_rate, data)


def car(rec: Recording) -> Recording:
    """Common-average reference: subtract the instantaneous channel mean."""
    if rec.n_channels < 2:
        raise SingleChannel("common-average referencing needs >= 2 channels")
    return Recording(rec.channels, rec.sample_rate,
                     rec.data - rec.data.mean(axis=0, keepdims=True))


def baseline_correct(epoch: np.ndarray, fs: int, pre_ms: float = 200.0) -> np.ndarray:
    """Subtract each channel's mean over the pre-trigger interval.

    `epoch` is (n_channels, n_samples) with the first floor(pre_ms/1000*fs)
    samples preceding the trigger.
    """
    epoch = np.asarray(epoch, dtype=np.float64)
    pre_n = math.floor(pre_ms / 1000.0 * fs)
    if epoch.ndim != 2 or epoch.shape[1] < pre_n or pre_n < 1:
        raise MissingPrestim(
            f"epoch with {epoch.shape} lacks a {pre_n}-sample pre-stimulus interval"
        )
    return epoch - epoch[:, :pre_n].mean(axis=1, keepdims=True)


# -------------------------------------------------------------------- ICA

@dataclass(frozen=True)
class IcaDecomposition:
    unmixing: np.ndarray      # (n_comp, n_channels); sources = unmixing @ centered data
    mixing: np.ndarray        # (n_channels, n_comp)
    sources: np.ndarray       # (n_comp, n_samples), unit variance rows
    whitener: np.ndarray      # (n_comp, n_channels)
    channel_means: np.ndarray  # (n_channels,) removed before decomposition
    converged: bool
    n_iter: int


def _sym_decorrelate(w: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(w @ w.T)
    return (vecs * (1.0 / np.sqrt(vals))) @ vecs.T @ w


def fast_ica(data: Recording | np.ndarray, n_comp: int, seed: int = 0,
             max_iter: int = 200, tol: float = 1e-6) -> IcaDecomposition:
    """Symmetric FastICA with tanh contrast after eigendecomposition
    whitening onto the top `n_comp` components.

    Convergence is max_i |1 - |<w_i_new, w_i_old>|| < tol; if the iteration
    budget runs out the best (last) iterate is returned with the converged
    flag cleared.
    """
    x = data.data if isinstance(data, Recording) else np.asarray(data, dtype=np.float64)
    n_ch, n_samples = x.shape
    if n_comp > n_ch:
        raise RankDeficient(f"cannot extract {n_comp} components from {n_ch} channels")
    means = x.mean(axis=1)
    xc = x - means[:, None]
    cov = (xc @ xc.T) / (n_samples - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:n_comp]
    top = vals[order]
    if top[-1] <= max(vals.max(), 0.0) * 1e-12 or top[-1] <= 0.0:
        raise RankDeficient(
            f"component {n_comp} eigenvalue {top[-1]:.3e} is numerically zero"
        )
    whitener = (vecs[:, order] / np.sqrt(top)).T  # (n_comp, n_ch)
    z = whitener @ xc

    rng = np.random.default_rng([seed, 3343])
    w = _sym_decorrelate(rng.standard_normal((n_comp, n_comp)))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        wz = w @ z
        g = np.tanh(wz)
        g_prime = 1.0 - g * g
        w_new = (g @ z.T) / n_samples - (g_prime.mean(axis=1)[:, None] * w)
        w_new = _sym_decorrelate(w_new)
        delta = np.max(np.abs(1.0 - np.abs(np.sum(w_new * w, axis=1))))
        w = w_new
        if delta < tol:
            converged = True
            break

    unmixing = w @ whitener
    sources = unmixing @ xc
    mixing = np.linalg.pinv(unmixing)
    return IcaDecomposition(unmixing, mixing, sources, whitener, means, converged, it)


def reject_eog(ica: IcaDecomposition, rec: Recording,
               frontal: Sequence[str] = FRONTAL_EOG_CHANNELS,
               r_thresh: float = 0.8) -> tuple[Recording, tuple[int, ...]]:
    """Zero components whose time course correlates (|r| >= r_thresh) with
    any frontal channel, then reconstruct. Returns the cleaned recording and
    the removed component indices (possibly empty)."""
    rows = []
    for name in frontal:
        rows.append(rec.data[rec.channel_index(name)])
    frontal_data = np.stack(rows)
    removed = []
    for ci in range(ica.sources.shape[0]):
        src = ica.sources[ci]
        best = max(abs(_pearson(src, f)) for f in frontal_data)
        if best >= r_thresh:
            removed.append(ci)
    kept_sources = ica.sources.copy()
    if removed:
        kept_sources[removed, :] = 0.0
    data = ica.mixing @ kept_sources + ica.channel_means[:, None]
    return Recording(rec.channels, rec.sample_rate, data), tuple(removed)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    if denom == 0.0:
        return 0.0
    return float((a * b).sum() / denom)


# ------------------------------------------------------------------- Welch

@dataclass(frozen=True)
class Psd:
    freqs: np.ndarray   # uniform grid, 0..fs/2
    power: np.ndarray   # one-sided density, amplitude^2/Hz
    segment_len: int
    overlap: float
    window: str = "hann"


def welch_psd(x: np.ndarray, fs: int, segment_len: int = 1024,
              overlap: float = 0.5) -> Psd:
    """Welch estimate: mean-detrended, Hann-windowed blocks at 50% hop,
    periodograms scaled by 1/(fs * sum(w^2)), one-sided doubling except at
    DC and Nyquist, averaged over blocks."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise SignalTooShort("welch_psd expects a single-channel 1D signal")
    if x.size < segment_len:
        raise SignalTooShort(f"need at least {segment_len} samples, got {x.size}")
    hop = int(segment_len * (1.0 - overlap))
    if hop < 1:
        raise ValueError("overlap too large")
    n = segment_len // 2 + 1
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(segment_len) / segment_len)
    scale = 1.0 / (fs * (w * w).sum())
    acc = np.zeros(n)
    n_blocks = 0
    for start in range(0, x.size - segment_len + 1, hop):
        block = x[start:start + segment_len]
        block = block - block.mean()
        spec = np.fft.rfft(block * w)
        p = (spec.real ** 2 + spec.imag ** 2) * scale
        if segment_len % 2 == 0:
            p[1:-1] *= 2.0  # last bin is Nyquist
        else:
            p[1:] *= 2.0
        acc += p
        n_blocks += 1
    freqs = np.fft.rfftfreq(segment_len, 1.0 / fs)
    return Psd(freqs, acc / n_blocks, segment_len, overlap)


def band_power(psd: Psd, band: tuple[float, float]) -> float:
    """Trapezoidal integral of the PSD over [lo, hi]; endpoints off the grid
    are linearly interpolated so disjoint bands add exactly."""
    lo, hi = band
    if lo >= hi or lo < psd.freqs[0] or hi > psd.freqs[-1]:
        raise BandOutOfRange(
            f"band ({lo}, {hi}) outside grid [{psd.freqs[0]}, {psd.freqs[-1]}]"
        )
    inside = (psd.freqs > lo) & (psd.freqs < hi)
    freqs = np.concatenate(([lo], psd.freqs[inside], [hi]))
    power = np.concatenate((
        [np.interp(lo, psd.freqs, psd.power)],
        psd.power[inside],
        [np.interp(hi, psd.freqs, psd.power)],
    ))
    return float(np.trapezoid(power, freqs))


def write_psd_csv(psd: Psd, path: str | Path) -> None:
    lines = ["freq_hz,power"]
    for f, p in zip(psd.freqs, psd.power):
        lines.append(f"{f:.10g},{p:.10g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


# ------------------------------------------------- evoked / topographic maps

@dataclass(frozen=True)
class VizEpochs:
    """Trigger-locked windows on the visualization path (-pre..post around
    each trigger), baseline corrected, grouped by class."""

    times: np.ndarray                     # seconds relative to the trigger
    channels: tuple[str, ...]
    by_class: dict[int, np.ndarray]       # label -> (n_epochs, n_ch, n_times)


def collect_viz_epochs(rec: Recording, triggers: Sequence[TriggerEvent],
                       pre_ms: float = 200.0, post_s: float = 3.0) -> VizEpochs:
    """Cut baseline-corrected visualization epochs around every trigger."""
    fs = rec.sample_rate
    pre_n = math.floor(pre_ms / 1000.0 * fs)
    post_n = int(round(post_s * fs))
    grouped: dict[int, list[np.ndarray]] = {}
    for i, trig in enumerate(triggers):
        a = trig.sample_index - pre_n
        b = trig.sample_index + post_n
        if a < 0:
            raise MissingPrestim(f"trigger {i} at sample {trig.sample_index} lacks "
                                 f"{pre_n} pre-stimulus samples")
        if b > rec.n_samples:
            raise WindowOutOfBounds(f"trigger {i} needs samples up to {b}, "
                                    f"recording has {rec.n_samples}")
        window = baseline_correct(rec.data[:, a:b], fs, pre_ms)
        grouped.setdefault(trig.label, []).append(window)
    times = (np.arange(pre_n + post_n) - pre_n) / fs
    return VizEpochs(times, rec.channels,
                     {label: np.stack(eps) for label, eps in grouped.items()})


def evoked_average(viz: VizEpochs, channel: str) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Per-class pointwise mean waveform for one channel."""
    if channel not in viz.channels:
        raise UnknownChannel(f"channel {channel!r} not present")
    ci = viz.channels.index(channel)
    for label in range(len(LABELS)):
        if label not in viz.by_class or viz.by_class[label].shape[0] == 0:
            raise EmptyClass(f"no epochs for class {LABELS[label]}")
    waves = {label: viz.by_class[label][:, ci, :].mean(axis=0)
             for label in viz.by_class}
    return viz.times, waves


def write_evoked_csv(times: np.ndarray, waves: dict[int, np.ndarray],
                     path: str | Path) -> None:
    lines = ["time_s,straight,left,right"]
    for i, t in enumerate(times):
        vals = ",".join(f"{waves[label][i]:.10g}" for label in (0, 1, 2))
        lines.append(f"{t:.10g},{vals}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def topo_means(viz: VizEpochs, window: tuple[float, float] = (0.0, 3.0)
               ) -> dict[int, np.ndarray]:
    """Per class, per channel: mean signal over the post-trigger window."""
    sel = (viz.times >= window[0]) & (viz.times <= window[1])
    if not sel.any():
        raise WindowOutOfBounds(f"window {window} outside epoch time axis")
    return {label: eps[:, :, sel].mean(axis=(0, 2))
            for label, eps in viz.by_class.items()}


def montage_coords(channels: Sequence[str]) -> np.ndarray:
    """(n, 2) montage coordinates; unknown channels raise MissingCoords."""
    table = coords2d()
    missing = [c for c in channels if c not in table]
    if missing:
        raise MissingCoords(f"no head coordinates for {missing}")
    return np.array([table[c] for c in channels], dtype=np.float64)


def idw_interpolate(values: np.ndarray, coords: np.ndarray, grid_n: int = 64,
                    power: float = 2.0, n_neighbors: int = 12
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-distance-weighted interpolation onto a grid over [-1, 1]^2.

    Returns (grid, inside) where `inside` masks points on the head disc;
    grid values outside are NaN. Grid points coinciding with an electrode
    take its value exactly.
    """
    axis = np.linspace(-1.0, 1.0, grid_n)
    gx, gy = np.meshgrid(axis, axis)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = (pts ** 2).sum(axis=1) <= 1.0
    k = min(n_neighbors, len(values))
    grid = np.full(pts.shape[0], np.nan)
    d2 = ((pts[inside, None, :] - coords[None, :, :]) ** 2).sum(axis=2)
    dist = np.sqrt(d2)
    out = np.empty(dist.shape[0])
    for i, row in enumerate(dist):
        nearest = np.argsort(row, kind="stable")[:k]
        dn = row[nearest]
        if dn[0] < 1e-12:
            out[i] = values[nearest[0]]
            continue
        weights = 1.0 / dn ** power
        out[i] = (weights * values[nearest]).sum() / weights.sum()
    grid[inside] = out
    return grid.reshape(grid_n, grid_n), inside.reshape(grid_n, grid_n)


def write_topo_csv(channels: Sequence[str], coords: np.ndarray,
                   values: np.ndarray, path: str | Path) -> None:
    lines = ["channel,x,y,value"]
    for name, (x, y), v in zip(channels, coords, values):
        lines.append(f"{name},{x:.6f},{y:.6f},{v:.10g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
