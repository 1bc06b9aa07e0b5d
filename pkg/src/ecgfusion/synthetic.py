"""Synthetic annotated ECG records for running the pipeline without PhysioNet data.

Beats are sums of Gaussian waves (P, Q, R, S, T) whose shape depends on the
AAMI class, with per-beat jitter, premature timing for ectopic beats, and a
little baseline drift and white noise. Records come out as `EcgRecord`s with
MIT symbols, so they go through the same segmentation path as real data.
"""

from __future__ import annotations

import numpy as np

from .ingest import Annotation, EcgRecord, RecordHeader, SignalSpec

# (centre s, amplitude mV, width s) per wave
_WAVES = {
    "N": [(-0.16, 0.15, 0.025), (-0.03, -0.10, 0.010), (0.0, 1.0, 0.012), (0.03, -0.25, 0.012), (0.26, 0.30, 0.050)],
    "S": [(-0.10, -0.22, 0.020), (-0.03, -0.08, 0.010), (0.0, 0.9, 0.012), (0.03, -0.30, 0.012), (0.24, 0.25, 0.045)],
    "V": [(0.0, 1.2, 0.040), (0.07, -0.60, 0.040), (0.32, -0.40, 0.070)],
    "Q": [(-0.045, 1.2, 0.003), (0.0, 0.8, 0.035), (0.06, -0.30, 0.030), (0.30, -0.30, 0.070)],
}
_SYMBOL = {0: "N", 1: "A", 2: "V", 3: "F", 4: "/"}
DEFAULT_MIX = (0.62, 0.12, 0.14, 0.05, 0.07)


def _waves_for(cls: int, rng) -> list[tuple[float, float, float]]:
    if cls == 3:
        w = rng.uniform(0.35, 0.65)
        return [(c, a * (1 - w), s) for c, a, s in _WAVES["N"]] + [(c, a * w, s) for c, a, s in _WAVES["V"]]
    return _WAVES["NSVFQ"[cls]]


def beat_waveform(cls: int, t: np.ndarray, rng, jitter: float = 1.0) -> np.ndarray:
    """One beat of class `cls` evaluated at times `t` (seconds relative to the R peak)."""
    scale = rng.uniform(1 - 0.2 * jitter, 1 + 0.2 * jitter)
    out = np.zeros_like(t)
    for c, a, s in _waves_for(cls, rng):
        c = c + rng.normal(0, 0.008 * jitter)
        a = a * scale * rng.uniform(1 - 0.15 * jitter, 1 + 0.15 * jitter)
        s = s * rng.uniform(1 - 0.15 * jitter, 1 + 0.15 * jitter)
        out += a * np.exp(-0.5 * ((t - c) / s) ** 2)
    return out


def synthetic_record(n_beats: int = 400, rate: float = 360.0, seed: int = 0,
                     mix=DEFAULT_MIX, noise_mv: float = 0.03, name: str | None = None) -> EcgRecord:
    """Annotated single-lead record (lead described as MLII) in 200 adu/mV units."""
    rng = np.random.default_rng(seed)
    labels = rng.choice(5, size=n_beats, p=np.asarray(mix) / np.sum(mix))
    rr = rng.normal(0.8, 0.05, size=n_beats).clip(0.6, 1.0)
    premature = np.isin(labels, (1, 2))
    rr[premature] *= rng.uniform(0.6, 0.75, size=premature.sum())
    r_times = 0.6 + np.cumsum(rr)
    duration = r_times[-1] + 1.0
    n = int(duration * rate)
    t = np.arange(n) / rate
    sig = np.zeros(n)
    half = int(0.6 * rate)
    for cls, rt in zip(labels, r_times):
        c = int(round(rt * rate))
        lo, hi = max(0, c - half), min(n, c + half)
        sig[lo:hi] += beat_waveform(int(cls), t[lo:hi] - rt, rng)
    f1, f2 = rng.uniform(0.15, 0.35, size=2)
    sig += 0.1 * np.sin(2 * np.pi * f1 * t + rng.uniform(0, 6.3)) + 0.05 * np.sin(2 * np.pi * f2 * t)
    sig += rng.normal(0, noise_mv, size=n)
    gain = 200.0
    adu = np.clip(np.round(sig * gain), -2048, 2047).astype(np.int64)[:, None]
    name = name or f"syn{seed}"
    spec = SignalSpec(f"{name}.dat", 212, gain, 0, "mV", 12, 0, int(adu[0, 0]), None, 0, "MLII")
    header = RecordHeader(name, 1, rate, n, (spec,))
    anns = tuple(Annotation(int(round(rt * rate)), _SYMBOL[int(c)]) for c, rt in zip(labels, r_times))
    return EcgRecord(header, adu, anns)


def toy_beats(n: int = 32, m: int = 5, length: int = 187, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Small balanced set of clean, normalized-ready beats (physical units)."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % m
    t = np.linspace(-0.25, 0.4, length, endpoint=False)
    X = np.stack([beat_waveform(int(c), t, rng, jitter=0.5) for c in y])
    return X, y
