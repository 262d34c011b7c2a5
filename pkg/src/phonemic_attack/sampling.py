"""Phoneme-density balanced selection of a few training utterances."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .corpus import CorpusEntry, DatasetStats

DEFAULT_ALPHA = 0.2
DEFAULT_K = 10


class EmptySelectionError(ValueError):
    pass


@dataclass(frozen=True)
class SamplingConfig:
    alpha: float = DEFAULT_ALPHA
    k: int = DEFAULT_K

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")


def density_deviation(entries: Sequence[CorpusEntry], stats: DatasetStats) -> np.ndarray:
    return np.abs(stats.avg_density - np.array([e.density for e in entries]))


def pdbs_filter(entries: Sequence[CorpusEntry], stats: DatasetStats, alpha: float) -> list[CorpusEntry]:
    """Entries whose phoneme density lies within ``alpha`` of the corpus average."""
    if not entries:
        return []
    keep = density_deviation(entries, stats) <= alpha
    return [e for e, k in zip(entries, keep) if k]


def pick_scores(entries: Sequence[CorpusEntry]) -> np.ndarray:
    """Rank(duration) + rank(peak amplitude); larger is better, ties share the mean rank."""
    durations = [e.duration for e in entries]
    peaks = [e.peak_amplitude for e in entries]
    return rankdata(durations) + rankdata(peaks)


def top_picker(filtered: Sequence[CorpusEntry], k: int) -> list[CorpusEntry]:
    """The ``k`` best-scoring entries, best first; equal scores keep input order."""
    if not filtered:
        raise EmptySelectionError("nothing to pick from: the density filter kept no utterances")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if len(filtered) < k:
        warnings.warn(f"only {len(filtered)} utterances passed the density filter; wanted {k}",
                      stacklevel=2)
    scores = pick_scores(filtered)
    order = sorted(range(len(filtered)), key=lambda i: (-scores[i], i))
    return [filtered[i] for i in order[:k]]


def select(entries: Sequence[CorpusEntry], stats: DatasetStats, cfg: SamplingConfig) -> list[CorpusEntry]:
    filtered = pdbs_filter(entries, stats, cfg.alpha)
    if not filtered:
        dev = density_deviation(entries, stats)
        raise EmptySelectionError(
            f"no utterance within alpha={cfg.alpha} of D={stats.avg_density:.4f}; "
            f"smallest deviation is {dev.min():.4f}")
    return top_picker(filtered, cfg.k)
