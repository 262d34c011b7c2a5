"""Synthetic room impulse responses and truncated convolution with its adjoint."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .audio import SAMPLE_RATE, Waveform, load_wav

RIR_SECONDS = 0.25
TAIL_ENERGY = 0.5  # reverberant energy relative to the unit direct path
RT60_RANGE = (0.05, 1.0)


@dataclass(frozen=True, eq=False)
class RoomImpulse:
    taps: np.ndarray
    rt60: float = 0.0
    seed: int = -1

    @property
    def is_identity(self) -> bool:
        return self.taps[0] == 1.0 and not np.any(self.taps[1:])


def identity_rir() -> RoomImpulse:
    return RoomImpulse(np.array([1.0]))


def decay_envelope(t, rt60: float):
    """Amplitude envelope falling 60 dB at ``t = rt60``."""
    return np.exp(-3.0 * np.log(10.0) * np.asarray(t) / rt60)


def make_rir(rt60: float, seed: int, sample_rate: int = SAMPLE_RATE) -> RoomImpulse:
    """Exponentially decaying Gaussian tail behind a unit direct path."""
    lo, hi = RT60_RANGE
    if not lo <= rt60 <= hi:
        raise ValueError(f"rt60 must lie in [{lo}, {hi}] s, got {rt60}")
    n = int(round(RIR_SECONDS * sample_rate))
    rng = np.random.default_rng(seed)
    t = np.arange(1, n) / sample_rate
    tail = rng.standard_normal(n - 1) * decay_envelope(t, rt60)
    energy = float(np.sum(tail * tail))
    if energy > 0:
        tail *= np.sqrt(TAIL_ENERGY / energy)
    return RoomImpulse(np.concatenate([[1.0], tail]), rt60, seed)


def load_rir(path) -> RoomImpulse:
    wav = load_wav(path)
    taps = wav.samples.copy()
    lead = int(np.argmax(np.abs(taps)))
    taps = taps[lead:] / taps[lead]
    return RoomImpulse(taps)


def convolve(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Linear convolution truncated to ``len(x)`` (causal, no clamping)."""
    x = np.asarray(x, dtype=np.float64)
    if taps.shape[0] == 1:
        return x * taps[0]
    if x.shape[0] * taps.shape[0] <= 4096:
        return np.convolve(x, taps)[: x.shape[0]]
    return fftconvolve(x, taps)[: x.shape[0]]


def apply_rir(w: Waveform, h: RoomImpulse) -> Waveform:
    if len(w) == 0 or h.taps.shape[0] == 0:
        raise ValueError("apply_rir needs nonempty inputs")
    return Waveform(np.clip(convolve(w.samples, h.taps), -1.0, 1.0), w.sample_rate)


def rir_backward(g, h: RoomImpulse) -> np.ndarray:
    """Adjoint of the truncated convolution: correlate ``g`` with the taps."""
    g = np.asarray(g, dtype=np.float64)
    taps = h.taps
    m = taps.shape[0]
    if m == 1:
        return g * taps[0]
    if g.shape[0] * m <= 4096:
        full = np.convolve(g, taps[::-1])
    else:
        full = fftconvolve(g, taps[::-1])
    return full[m - 1: m - 1 + g.shape[0]]
