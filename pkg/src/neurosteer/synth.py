"""Deterministic synthetic-EEG generator.

Reproduces the driving-scenario structure (92 road segments per round at
512 Hz, half straight, a quarter each turn direction) and the signal
phenomenology the pipeline is meant to expose: 1/f background, a ~10 Hz
posterior-weighted alpha rhythm, a ~0.5 Hz drift, lateralized frontal
deflections after turn triggers with opposite polarity across hemispheres,
a bilateral central pattern for straight driving, and optional eye blinks
on the frontal rim.

Every random stream is salted from the master seed (per channel, per
concern), so output is bit-identical regardless of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ConfigError
from .montage import CHANNELS_64, coords_array
from .recording import LEFT, RIGHT, STRAIGHT, Recording, TriggerEvent

SAMPLE_RATE = 512


@dataclass(frozen=True)
class ScenarioConfig:
    """Road-segment schedule: segment counts, class mix, and timing."""

    n_segments: int = 92
    class_mix: tuple[float, float, float] = (0.5, 0.25, 0.25)
    segment_mean_s: float = 8.0
    segment_jitter_s: float = 2.0
    lead_in_s: float = 2.0  # quiet preroll so the first trigger keeps its pre-stimulus window
    rounds: int = 1
    seed: int = 0

    def __post_init__(self):
        if abs(sum(self.class_mix) - 1.0) > 1e-9:
            raise ConfigError("class_mix must sum to 1")
        if self.n_segments < 1 or self.rounds < 1:
            raise ConfigError("n_segments and rounds must be >= 1")
        min_dur = self.segment_mean_s - self.segment_jitter_s
        if min_dur * SAMPLE_RATE < 1750 + 1:
            raise ConfigError("segments too short for the classifier window")


@dataclass(frozen=True)
class SignalConfig:
    """Amplitudes are microvolts; pattern_amp is the class-pattern knob
    (0 disables class information entirely) and snr scales it."""

    background_rms: float = 10.0
    spectral_exponent: float = 1.0
    alpha_amp: float = 6.0
    alpha_freq: float = 10.0
    drift_amp: float = 8.0
    drift_freq: float = 0.5
    pattern_amp: float = 16.0
    pattern_contra: float = -0.5
    pattern_on_s: float = 1.5    # sustained deflection, effectively rising from ~1.3 s
    pattern_off_s: float = 3.3
    pattern_rise_s: float = 0.15
    straight_scale: float = 0.85
    blink_amp: float = 40.0
    blink_rate_hz: float = 0.12
    snr: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("pattern_contra",):
                continue
            if v < 0:
                raise ConfigError(f"{f.name} must be >= 0")
        if self.spectral_exponent <= 0:
            raise ConfigError("spectral_exponent must be > 0")


class Scenario(NamedTuple):
    triggers: list[TriggerEvent]
    n_samples: int


# Spatial weights of the class-locked deflections, by channel name. Turn
# patterns are ipsilateral-dominant with an inverted contralateral mirror;
# straight driving gets a weaker bilateral central pattern.
_LEFT_WEIGHTS = {"AF7": 1.0, "Fp1": 0.8, "F7": 0.85, "F5": 0.7, "F3": 0.5,
                 "AF3": 0.6, "FT7": 0.35, "FC5": 0.3}
_MIRROR = {"AF7": "AF8", "Fp1": "Fp2", "F7": "F8", "F5": "F6", "F3": "F4",
           "AF3": "AF4", "FT7": "FT8", "FC5": "FC6"}
_STRAIGHT_WEIGHTS = {"Cz": 1.0, "FCz": 0.8, "CPz": 0.8, "C1": 0.6, "C2": 0.6,
                     "C3": 0.45, "C4": 0.45, "Fz": 0.4, "Pz": 0.4}

_BLINK_WEIGHTS = {"Fp1": 1.0, "Fp2": 1.0, "Fpz": 0.95, "AF7": 0.6, "AF8": 0.6,
                  "AF3": 0.7, "AF4": 0.7, "F7": 0.3, "F8": 0.3}


def _class_weight_vectors(channels: tuple[str, ...], contra: float,
                          straight_scale: float) -> dict[int, np.ndarray]:
    idx = {name: i for i, name in enumerate(channels)}
    left = np.zeros(len(channels))
    right = np.zeros(len(channels))
    for name, wgt in _LEFT_WEIGHTS.items():
        left[idx[name]] += wgt
        left[idx[_MIRROR[name]]] += contra * wgt
        right[idx[_MIRROR[name]]] += wgt
        right[idx[name]] += contra * wgt
    straight = np.zeros(len(channels))
    for name, wgt in _STRAIGHT_WEIGHTS.items():
        straight[idx[name]] = wgt * straight_scale
    return {STRAIGHT: straight, LEFT: left, RIGHT: right}


def _mix_counts(n: int, mix: tuple[float, float, float]) -> tuple[int, int, int]:
    raw = [f * n for f in mix]
    counts = [math.floor(v) for v in raw]
    # hand remaining segments to the largest fractional parts, ties to lower label
    rest = n - sum(counts)
    order = sorted(range(3), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in range(rest):
        counts[order[i]] += 1
    return tuple(counts)


def gen_scenario(cfg: ScenarioConfig = ScenarioConfig()) -> Scenario:
    """Trigger schedule: per round the class counts follow the mix exactly
    and the order is seed-shuffled; trigger sample indices accumulate from
    jittered segment durations at 512 Hz."""
    counts = _mix_counts(cfg.n_segments, cfg.class_mix)
    triggers: list[TriggerEvent] = []
    cursor = int(round(cfg.lead_in_s * SAMPLE_RATE))
    for rnd in range(cfg.rounds):
        rng = np.random.default_rng([cfg.seed, 31, rnd])
        labels = np.repeat(np.arange(3), counts)
        rng.shuffle(labels)
        durations = rng.uniform(cfg.segment_mean_s - cfg.segment_jitter_s,
                                cfg.segment_mean_s + cfg.segment_jitter_s,
                                size=cfg.n_segments)
        for label, dur in zip(labels, durations):
            triggers.append(TriggerEvent(cursor, int(label)))
            cursor += int(round(dur * SAMPLE_RATE))
    return Scenario(triggers, cursor)


def _one_over_f(rng: np.random.Generator, n: int, exponent: float, rms: float) -> np.ndarray:
    """Spectral synthesis: |X(f)| proportional to f^(-exponent/2) with random
    phases, scaled to the requested RMS."""
    n_freq = n // 2 + 1
    freqs = np.fft.rfftfreq(n, 1.0 / SAMPLE_RATE)
    amp = np.zeros(n_freq)
    amp[1:] = freqs[1:] ** (-exponent / 2.0)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_freq)
    spectrum = amp * np.exp(1j * phases)
    x = np.fft.irfft(spectrum, n)
    std = x.std()
    return x * (rms / std) if std > 0 else x


def gen_recording(triggers: list[TriggerEvent], n_samples: int,
                  sig: SignalConfig = SignalConfig(), seed: int = 0,
                  channels: tuple[str, ...] = CHANNELS_64) -> Recording:
    """Synthesize the 64-channel, 512 Hz recording behind a trigger schedule."""
    n_ch = len(channels)
    t = np.arange(n_samples) / SAMPLE_RATE
    data = np.empty((n_ch, n_samples))

    # Posterior weighting for the alpha rhythm, from the montage geometry.
    ypos = coords_array(channels)[:, 1]
    posterior = (1.0 - ypos) / 2.0  # 0 at the nose rim, 1 at the back
    alpha_weight = 0.35 + 0.65 * posterior

    common = np.random.default_rng([seed, 977])
    drift_phase = common.uniform(0.0, 2.0 * np.pi)
    for ci in range(n_ch):
        rng = np.random.default_rng([seed, 1009, ci])
        x = _one_over_f(rng, n_samples, sig.spectral_exponent, sig.background_rms)
        # Near-global slow drift: common phase, channel-dependent amplitude,
        # so common-average referencing attenuates but does not erase it.
        drift_gain = sig.drift_amp * (0.6 + 0.8 * rng.random())
        x += drift_gain * np.sin(2.0 * np.pi * sig.drift_freq * t + drift_phase
                                 + rng.normal(0.0, 0.15))
        alpha_env = 1.0 + 0.3 * np.sin(2.0 * np.pi * 0.11 * t + rng.uniform(0, 2 * np.pi))
        x += sig.alpha_amp * alpha_weight[ci] * alpha_env * \
            np.sin(2.0 * np.pi * sig.alpha_freq * t + rng.uniform(0, 2 * np.pi))
        data[ci] = x

    # Class-locked deflections: a smooth plateau inside the discriminative
    # interval, with per-trial amplitude and latency jitter.
    amp = sig.pattern_amp * sig.snr
    if amp > 0.0 and triggers:
        weights = _class_weight_vectors(channels, sig.pattern_contra, sig.straight_scale)
        trial_rng = np.random.default_rng([seed, 1213])
        for trig in triggers:
            gain = trial_rng.uniform(0.85, 1.15)
            shift = trial_rng.uniform(-0.1, 0.1)
            t_on = sig.pattern_on_s + shift
            t_off = sig.pattern_off_s + shift
            a = trig.sample_index + int((t_on - 4.0 * sig.pattern_rise_s) * SAMPLE_RATE)
            b = trig.sample_index + int((t_off + 4.0 * sig.pattern_rise_s) * SAMPLE_RATE)
            a, b = max(a, 0), min(b, n_samples)
            if a >= b:
                continue
            tau = (np.arange(a, b) - trig.sample_index) / SAMPLE_RATE
            plateau = 0.5 * (np.tanh((tau - t_on) / sig.pattern_rise_s)
                             - np.tanh((tau - t_off) / sig.pattern_rise_s))
            data[:, a:b] += (amp * gain) * weights[trig.label][:, None] * plateau[None, :]

    # Eye blinks on the frontal rim, independent of class.
    if sig.blink_amp > 0.0 and sig.blink_rate_hz > 0.0:
        blink_rng = np.random.default_rng([seed, 1423])
        blink_w = np.zeros(n_ch)
        for name, wgt in _BLINK_WEIGHTS.items():
            if name in channels:
                blink_w[channels.index(name)] = wgt
        blink_len = int(0.35 * SAMPLE_RATE)
        shape = np.sin(np.pi * np.arange(blink_len) / blink_len) ** 2
        pos = blink_rng.exponential(1.0 / sig.blink_rate_hz)
        while pos * SAMPLE_RATE + blink_len < n_samples:
            start = int(pos * SAMPLE_RATE)
            gain = sig.blink_amp * blink_rng.uniform(0.7, 1.3)
            data[:, start:start + blink_len] += gain * blink_w[:, None] * shape[None, :]
            pos += blink_rng.exponential(1.0 / sig.blink_rate_hz)

    return Recording(channels, SAMPLE_RATE, data)


# ------------------------------------------------------------- config files

def save_config(scenario: ScenarioConfig, sig: SignalConfig, path: str | Path) -> None:
    """Write both configs as a plain key-value text file."""
    lines = ["# scenario"]
    for f in fields(scenario):
        v = getattr(scenario, f.name)
        if f.name == "class_mix":
            lines.append(f"class_mix = {v[0]},{v[1]},{v[2]}")
        else:
            lines.append(f"{f.name} = {v}")
    lines.append("# signal")
    for f in fields(sig):
        lines.append(f"{f.name} = {getattr(sig, f.name)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_config(path: str | Path) -> tuple[ScenarioConfig, SignalConfig]:
    """Parse a key-value config file; unknown keys are rejected."""
    scenario_fields = {f.name: f for f in fields(ScenarioConfig)}
    signal_fields = {f.name: f for f in fields(SignalConfig)}
    scen_kw: dict = {}
    sig_kw: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            if key == "class_mix":
                parts = [float(p) for p in value.split(",")]
                if len(parts) != 3:
                    raise ValueError
                scen_kw[key] = tuple(parts)
            elif key in scenario_fields:
                typ = int if key in ("n_segments", "rounds", "seed") else float
                scen_kw[key] = typ(value)
            elif key in signal_fields:
                sig_kw[key] = float(value)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError:
            raise ConfigError(f"line {lineno}: cannot parse value {value!r} for {key!r}") from None
    return ScenarioConfig(**scen_kw), SignalConfig(**sig_kw)


def with_pattern_amp(sig: SignalConfig, amp: float) -> SignalConfig:
    """Convenience for null-signal experiments."""
    return replace(sig, pattern_amp=amp)
