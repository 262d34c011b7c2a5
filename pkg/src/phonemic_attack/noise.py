"""Phonemic noise clips: tiling, sliding injection, its adjoint, and l-inf projection."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import SAMPLE_RATE, Waveform, db, load_wav, save_wav

DEFAULT_BUDGET_DB = -33.0
REFERENCE_PEAK = 0.9


def epsilon_for_budget(budget_db: float = DEFAULT_BUDGET_DB, reference_peak: float = REFERENCE_PEAK) -> float:
    """Linear l-inf bound whose peak sits ``budget_db`` below ``reference_peak``."""
    return reference_peak * 10.0 ** (budget_db / 20.0)


DEFAULT_EPSILON = epsilon_for_budget()


@dataclass(eq=False)
class NoiseClip:
    delta: np.ndarray
    epsilon: float
    sample_rate: int = SAMPLE_RATE
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=np.float64).reshape(-1)
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")

    def __len__(self) -> int:
        return self.delta.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    @property
    def waveform(self) -> Waveform:
        return Waveform(self.delta, self.sample_rate)

    @property
    def linf(self) -> float:
        return float(np.max(np.abs(self.delta))) if len(self) else 0.0

    def with_delta(self, delta: np.ndarray) -> "NoiseClip":
        return NoiseClip(delta, self.epsilon, self.sample_rate, dict(self.meta))


def clip_samples(seconds: float, sample_rate: int = SAMPLE_RATE) -> int:
    return int(round(seconds * sample_rate))


@dataclass(frozen=True)
class SlideSchedule:
    """Sliding step ``beta`` (seconds) at optimization step ``n``."""

    beta: float
    n: int = 0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.n < 0:
            raise ValueError(f"iteration index must be nonnegative, got {self.n}")

    def at(self, n: int) -> "SlideSchedule":
        return SlideSchedule(self.beta, n)

    def phase(self, clip_len: int, sample_rate: int = SAMPLE_RATE) -> int:
        """Offset into the clip, in samples: (n * beta) mod clip length.

        Computed on integer samples so e.g. 0.77 s mod 0.2 s is exactly 2720.
        """
        return (self.n * clip_samples(self.beta, sample_rate)) % clip_len


ALIGNED = SlideSchedule(1.0, 0)


def splice(delta, n_copies: int) -> np.ndarray:
    """delta concatenated with itself ``n_copies`` times."""
    if n_copies < 1:
        raise ValueError(f"n_copies must be at least 1, got {n_copies}")
    d = delta.delta if isinstance(delta, NoiseClip) else np.asarray(delta)
    return np.tile(d, n_copies)


def _tile_index(length: int, clip_len: int, phase: int) -> np.ndarray:
    return (np.arange(length) + phase) % clip_len


def inject(x, delta, sched: SlideSchedule) -> np.ndarray:
    """Noise track for ``x``: the tiled clip read from offset ``sched.phase``.

    Equivalent to cutting ``[phase, phase + len(x))`` out of
    ``splice(delta, m)`` for large enough ``m``. ``x`` may be a Waveform or a
    sample count.
    """
    d = delta.delta if isinstance(delta, NoiseClip) else np.asarray(delta, dtype=np.float64)
    sr = delta.sample_rate if isinstance(delta, NoiseClip) else SAMPLE_RATE
    length = x if isinstance(x, (int, np.integer)) else len(x)
    if len(d) == 0:
        raise ValueError("empty noise clip")
    if len(d) > length:
        raise ValueError(f"noise clip ({len(d)} samples) longer than audio ({length})")
    return d[_tile_index(length, len(d), sched.phase(len(d), sr))]


def fold_gradient(grad_x, delta_len: int, sched: SlideSchedule, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Adjoint of :func:`inject`: sum every track position onto the clip sample it reads."""
    g = np.asarray(grad_x, dtype=np.float64)
    idx = _tile_index(g.shape[0], delta_len, sched.phase(delta_len, sample_rate))
    return np.bincount(idx, weights=g, minlength=delta_len)


def project_linf(delta: NoiseClip) -> NoiseClip:
    return delta.with_delta(np.clip(delta.delta, -delta.epsilon, delta.epsilon))


def random_clip(epsilon: float, seconds: float, seed: int, sample_rate: int = SAMPLE_RATE) -> NoiseClip:
    rng = np.random.default_rng(seed)
    n = clip_samples(seconds, sample_rate)
    return NoiseClip(rng.uniform(-epsilon, epsilon, n), epsilon, sample_rate,
                     {"seed": seed, "l_delta_p": seconds})


def noise_db(clip: NoiseClip, reference_peak: float = REFERENCE_PEAK) -> float:
    return float(db(clip.linf) - db(reference_peak)) if clip.linf > 0 else float("-inf")


def save_noise(clip: NoiseClip, wav_path) -> Path:
    """Clip as 16-bit WAV plus ``<stem>.json`` sidecar; returns the sidecar path."""
    wav_path = Path(wav_path)
    save_wav(clip.waveform, wav_path)
    side = wav_path.with_suffix(".json")
    doc = {"l_delta_p": clip.duration, "epsilon": clip.epsilon}
    doc.update({k: v for k, v in clip.meta.items() if k not in doc})
    side.write_text(json.dumps(doc, indent=2, sort_keys=True))
    return side


def load_noise(wav_path) -> NoiseClip:
    wav_path = Path(wav_path)
    wav = load_wav(wav_path)
    side = wav_path.with_suffix(".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    eps = float(meta.pop("epsilon", wav.peak))
    meta.pop("l_delta_p", None)
    meta["l_delta_p"] = wav.duration
    # 16-bit rounding can nudge a sample just past the bound
    return project_linf(NoiseClip(wav.samples, eps, wav.sample_rate, meta))
