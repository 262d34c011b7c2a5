"""Waveform container, 16-bit PCM WAV I/O and amplitude metrics."""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SAMPLE_RATE = 16000


class WavError(ValueError):
    """Base class for WAV decoding failures."""


class TruncatedHeaderError(WavError):
    pass


class UnsupportedEncodingError(WavError):
    pass


class MultiChannelError(WavError):
    pass


class SilentReferenceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64).reshape(-1))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples))) if len(self) else 0.0

    def clamped(self) -> "Waveform":
        return Waveform(np.clip(self.samples, -1.0, 1.0), self.sample_rate)

    @classmethod
    def zeros(cls, n: int, sample_rate: int = SAMPLE_RATE) -> "Waveform":
        return cls(np.zeros(n), sample_rate)


def resample_linear(w: Waveform, sample_rate: int = SAMPLE_RATE) -> Waveform:
    if w.sample_rate == sample_rate:
        return w
    n_out = int(round(len(w) * sample_rate / w.sample_rate))
    t_in = np.arange(len(w)) / w.sample_rate
    t_out = np.arange(n_out) / sample_rate
    return Waveform(np.interp(t_out, t_in, w.samples), sample_rate)


def save_wav(w: Waveform, path) -> None:
    """Write a mono 16-bit PCM WAV with the canonical 44-byte header."""
    pcm = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(w.sample_rate)
        fh.writeframes(pcm.tobytes())


def _chunks(blob: bytes):
    pos = 12
    while pos + 8 <= len(blob):
        cid, size = struct.unpack_from("<4sI", blob, pos)
        yield cid, pos + 8, size
        pos += 8 + size + (size & 1)


def load_wav(path) -> Waveform:
    """Read a mono 16-bit PCM WAV; samples are scaled by 1/32768.

    Raises FileNotFoundError, TruncatedHeaderError, UnsupportedEncodingError
    or MultiChannelError.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such WAV file: {path}")
    blob = path.read_bytes()
    if len(blob) < 12:
        raise TruncatedHeaderError(f"{path}: {len(blob)} bytes, RIFF header needs 12")
    if blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise UnsupportedEncodingError(f"{path}: not a RIFF/WAVE file")

    fmt = data = None
    for cid, start, size in _chunks(blob):
        if cid == b"fmt ":
            if start + 16 > len(blob):
                raise TruncatedHeaderError(f"{path}: fmt chunk cut short")
            fmt = struct.unpack_from("<HHIIHH", blob, start)
        elif cid == b"data":
            data = blob[start:start + size]
            break
    if fmt is None or data is None:
        raise TruncatedHeaderError(f"{path}: missing fmt or data chunk")

    tag, channels, rate, _, _, bits = fmt
    if tag != 1 or bits != 16:
        raise UnsupportedEncodingError(f"{path}: format tag {tag}, {bits} bits; need 16-bit PCM")
    if channels != 1:
        raise MultiChannelError(f"{path}: {channels} channels; need mono")
    pcm = np.frombuffer(data[: len(data) // 2 * 2], dtype="<i2")
    return Waveform(pcm.astype(np.float64) / 32768.0, rate)


def db(value: float) -> float:
    return 20.0 * np.log10(value)


def db_relative(noise: Waveform, reference: Waveform) -> float:
    """Peak level of ``noise`` in dB relative to the peak of ``reference``."""
    if len(noise) == 0 or len(reference) == 0:
        raise ValueError("db_relative needs nonempty waveforms")
    ref = reference.peak
    if ref == 0.0:
        raise SilentReferenceError("reference waveform is silent")
    peak = noise.peak
    if peak == 0.0:
        return float("-inf")
    return float(db(peak) - db(ref))


def mix(a: Waveform, b: Waveform) -> Waveform:
    if a.sample_rate != b.sample_rate:
        raise ValueError(f"sample rate mismatch: {a.sample_rate} vs {b.sample_rate}")
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return Waveform(np.clip(a.samples + b.samples, -1.0, 1.0), a.sample_rate)
