"""Noise generators and exact-SNR injection for robustness tests.

All randomness comes from ``numpy.random.Generator(PCG64(seed))``; Gaussian
draws use numpy's ziggurat sampler (``standard_normal``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .beats import minmax_normalize
from .errors import NoiseRecordMissing, ZeroPowerNoise, ZeroPowerSignal

CLEAN = math.inf


class NoiseKind(str, enum.Enum):
    AWGN = "awgn"
    BW = "bw"
    MA = "ma"
    EM = "em"
    NSTDB_BW = "nstdb_bw"
    NSTDB_EM = "nstdb_em"
    NSTDB_MA = "nstdb_ma"

    @property
    def needs_record(self) -> bool:
        return self.value.startswith("nstdb")


@dataclass(frozen=True)
class NoiseSpec:
    kind: NoiseKind
    snr_db: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ValueError(f"snr_db must be finite or +inf, got {self.snr_db}")


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def signal_power(v: np.ndarray) -> float:
    """Population variance: mean square after removing the mean."""
    v = np.asarray(v, dtype=np.float64)
    return float(np.mean((v - v.mean()) ** 2))


def snr_db(signal: np.ndarray, noise: np.ndarray) -> float:
    return 10.0 * math.log10(signal_power(signal) / signal_power(noise))


def scale_to_snr(signal: np.ndarray, noise: np.ndarray, snr_db: float) -> np.ndarray:
    ps = signal_power(signal)
    pn = signal_power(noise)
    if ps <= 0:
        raise ZeroPowerSignal("signal has zero power")
    if pn <= 0:
        raise ZeroPowerNoise("noise has zero power")
    alpha = math.sqrt(ps / (pn * 10.0 ** (snr_db / 10.0)))
    return alpha * np.asarray(noise, dtype=np.float64)


def gen_awgn(n: int, seed) -> np.ndarray:
    if n < 1:
        raise ValueError("length must be >= 1")
    return _rng(seed).standard_normal(n)


def gen_bw(n: int, rate: float, seed, amplitudes: tuple[float, float] | None = None) -> np.ndarray:
    """Two sinusoids with 0.5-2 cycles over the window, random phase and amplitude.

    `rate` only converts the cycle count to Hz for reporting; the waveform is
    defined per window.
    """
    if n < 2:
        raise ValueError("length must be >= 2")
    rng = _rng(seed)
    cycles = rng.uniform(0.5, 2.0, size=2)
    phase = rng.uniform(0.0, 2 * np.pi, size=2)
    amp = rng.uniform(0.5, 1.0, size=2) if amplitudes is None else np.asarray(amplitudes, float)
    t = np.arange(n) / n
    return (amp[:, None] * np.sin(2 * np.pi * cycles[:, None] * t + phase[:, None])).sum(0)


def highpass_diff(white: np.ndarray) -> np.ndarray:
    white = np.asarray(white, dtype=np.float64)
    return np.diff(white)


def gen_ma(n: int, seed) -> np.ndarray:
    """First difference of white noise: a crude high-frequency EMG stand-in."""
    if n < 2:
        raise ValueError("length must be >= 2")
    return highpass_diff(_rng(seed).standard_normal(n + 1))


def em_steps(n: int, onsets, signs, amplitudes) -> np.ndarray:
    """Sum of decaying steps, each ``sign * amp * exp(-(t - onset) / tau)`` with tau = n/8."""
    tau = n / 8.0
    t = np.arange(n)
    out = np.zeros(n)
    for s, sg, a in zip(onsets, signs, amplitudes):
        live = t >= s
        out[live] += sg * a * np.exp(-(t[live] - s) / tau)
    return out


def gen_em(n: int, seed) -> np.ndarray:
    """1-3 random-onset decaying steps of random sign."""
    if n < 2:
        raise ValueError("length must be >= 2")
    rng = _rng(seed)
    k = int(rng.integers(1, 4))
    onsets = rng.integers(0, n - 1, size=k)
    signs = rng.choice([-1.0, 1.0], size=k)
    amps = rng.uniform(0.5, 1.0, size=k)
    return em_steps(n, onsets, signs, amps)


def nstdb_excerpt(record: np.ndarray, n: int, seed) -> np.ndarray:
    record = np.asarray(record, dtype=np.float64)
    if record.size < n:
        raise NoiseRecordMissing(f"noise record has {record.size} samples, need {n}")
    off = int(_rng(seed).integers(0, record.size - n + 1))
    return record[off : off + n]


def make_noise(spec: NoiseSpec, n: int, rate: float = 360.0,
               nstdb: Mapping[str, np.ndarray] | None = None) -> np.ndarray:
    kind = spec.kind
    if kind is NoiseKind.AWGN:
        return gen_awgn(n, spec.seed)
    if kind is NoiseKind.BW:
        return gen_bw(n, rate, spec.seed)
    if kind is NoiseKind.MA:
        return gen_ma(n, spec.seed)
    if kind is NoiseKind.EM:
        return gen_em(n, spec.seed)
    if not nstdb or kind.value not in nstdb:
        raise NoiseRecordMissing(f"{kind.value} needs a loaded NSTDB noise record")
    return nstdb_excerpt(nstdb[kind.value], n, spec.seed)


def add_noise(beat: np.ndarray, spec: NoiseSpec, rate: float = 360.0,
              nstdb: Mapping[str, np.ndarray] | None = None) -> np.ndarray:
    """Beat (physical units) plus noise scaled to exactly `spec.snr_db`; a copy when clean."""
    beat = np.asarray(beat, dtype=np.float64)
    if spec.snr_db == CLEAN:
        return beat.copy()
    noise = make_noise(spec, beat.size, rate, nstdb)
    return beat + scale_to_snr(beat, noise, spec.snr_db)


def apply_noise(beat: np.ndarray, spec: NoiseSpec, rate: float = 360.0,
                nstdb: Mapping[str, np.ndarray] | None = None) -> np.ndarray:
    """add_noise followed by min-max normalization (the classifiers' input contract)."""
    return minmax_normalize(add_noise(beat, spec, rate, nstdb))


def cell_seed(root: int, *keys: int) -> int:
    """Stable per-(beat, spec) seed; independent of PYTHONHASHSEED."""
    return int(np.random.SeedSequence([root, *keys]).generate_state(1, np.uint64)[0])
