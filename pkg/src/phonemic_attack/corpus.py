"""Manifest ingestion, pooled phoneme statistics and a synthetic phoneme-speech corpus."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio import SAMPLE_RATE, Waveform, load_wav, resample_linear, save_wav
from .g2p import G2pDictionary, phoneme_count

log = logging.getLogger(__name__)


class CorpusError(RuntimeError):
    pass


class EmptyCorpusError(CorpusError):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    audio_path: Path
    transcript: str
    duration: float
    n_phonemes: int
    peak_amplitude: float
    audio: Waveform | None = field(default=None, repr=False, compare=False)

    @property
    def density(self) -> float:
        return self.n_phonemes / self.duration

    @property
    def utt_id(self) -> str:
        return self.audio_path.stem

    def load(self) -> Waveform:
        if self.audio is not None:
            return self.audio
        return resample_linear(load_wav(self.audio_path), SAMPLE_RATE)


@dataclass(frozen=True)
class DatasetStats:
    avg_density: float
    total_phonemes: int
    total_duration: float
    n_entries: int

    def as_dict(self) -> dict:
        return {
            "avg_density": self.avg_density,
            "total_phonemes": self.total_phonemes,
            "total_duration": self.total_duration,
            "n_entries": self.n_entries,
        }


def dataset_stats(entries: Sequence[CorpusEntry]) -> DatasetStats:
    """Pooled density: total phonemes over total seconds (not a mean of ratios)."""
    if not entries:
        raise EmptyCorpusError("no entries")
    phones = sum(e.n_phonemes for e in entries)
    seconds = float(sum(e.duration for e in entries))
    return DatasetStats(phones / seconds, phones, seconds, len(entries))


def read_manifest(path) -> list[dict]:
    path = Path(path)
    try:
        lines = path.read_text("utf-8").splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read manifest {path}: {exc}") from exc
    rows = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            row["audio"], row["text"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CorpusError(f"{path}:{lineno}: bad manifest row ({exc})") from exc
        rows.append(row)
    return rows


def write_manifest(path, rows: Sequence[dict]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps({"audio": row["audio"], "text": row["text"]}) + "\n")
    return path


def ingest(manifest, dictionary: G2pDictionary) -> tuple[list[CorpusEntry], DatasetStats]:
    manifest = Path(manifest)
    rows = read_manifest(manifest)
    if not rows:
        raise EmptyCorpusError(f"{manifest} lists no utterances")
    entries = []
    for lineno, row in enumerate(rows, 1):
        audio_path = (manifest.parent / row["audio"]).resolve()
        if not audio_path.is_file():
            raise CorpusError(f"{manifest}: entry {lineno}: missing audio file {audio_path}")
        wav = resample_linear(load_wav(audio_path), SAMPLE_RATE)
        if len(wav) == 0:
            raise CorpusError(f"{manifest}: entry {lineno}: empty audio {audio_path}")
        entries.append(CorpusEntry(
            audio_path=audio_path,
            transcript=row["text"],
            duration=wav.duration,
            n_phonemes=phoneme_count(dictionary, row["text"]),
            peak_amplitude=wav.peak,
            audio=wav,
        ))
    return entries, dataset_stats(entries)


def manifest_rows(entries: Sequence[CorpusEntry], relative_to) -> list[dict]:
    base = Path(relative_to).resolve()
    rows = []
    for e in entries:
        try:
            rel = e.audio_path.relative_to(base)
        except ValueError:
            rel = e.audio_path
        rows.append({"audio": rel.as_posix(), "text": e.transcript})
    return rows


# ---------------------------------------------------------------------------
# synthetic phoneme speech

# kind, base duration (s), tone pair or noise band (Hz), amplitude, voiced
_V, _S, _F, _P, _A = "vowel", "sonorant", "fricative", "stop", "affricate"
PHONE_TABLE: dict[str, tuple] = {
    "AA": (_V, 0.145, (730, 1090), 1.0, True),
    "AE": (_V, 0.145, (800, 1600), 1.0, True),
    "AH": (_V, 0.145, (520, 1190), 1.0, True),
    "AO": (_V, 0.145, (570, 840), 1.0, True),
    "AW": (_V, 0.145, (680, 1500, 420, 900), 1.0, True),
    "AY": (_V, 0.145, (700, 1200, 350, 2200), 1.0, True),
    "EH": (_V, 0.145, (500, 1950), 1.0, True),
    "ER": (_V, 0.145, (490, 1350), 1.0, True),
    "EY": (_V, 0.145, (480, 1900, 320, 2300), 1.0, True),
    "IH": (_V, 0.145, (390, 1990), 1.0, True),
    "IY": (_V, 0.145, (270, 2290), 1.0, True),
    "OW": (_V, 0.145, (500, 950, 350, 750), 1.0, True),
    "OY": (_V, 0.145, (560, 850, 380, 2000), 1.0, True),
    "UH": (_V, 0.145, (440, 1020), 1.0, True),
    "UW": (_V, 0.145, (300, 870), 1.0, True),
    "M": (_S, 0.100, (220, 1000), 0.5, True),
    "N": (_S, 0.100, (220, 1600), 0.5, True),
    "NG": (_S, 0.100, (220, 2500), 0.5, True),
    "L": (_S, 0.100, (380, 1400), 0.5, True),
    "R": (_S, 0.100, (450, 1150), 0.5, True),
    "W": (_S, 0.100, (300, 650), 0.5, True),
    "Y": (_S, 0.100, (300, 2600), 0.5, True),
    "S": (_F, 0.120, (4500, 7500), 0.35, False),
    "Z": (_F, 0.120, (4500, 7500), 0.35, True),
    "SH": (_F, 0.120, (2200, 4000), 0.35, False),
    "ZH": (_F, 0.120, (2200, 4000), 0.35, True),
    "F": (_F, 0.120, (1000, 7800), 0.2, False),
    "V": (_F, 0.120, (1000, 7800), 0.2, True),
    "TH": (_F, 0.120, (5500, 7900), 0.2, False),
    "DH": (_F, 0.120, (5500, 7900), 0.2, True),
    "HH": (_F, 0.120, (600, 3000), 0.2, False),
    "P": (_P, 0.090, (300, 1500), 0.6, False),
    "B": (_P, 0.090, (300, 1500), 0.6, True),
    "T": (_P, 0.090, (3000, 6000), 0.6, False),
    "D": (_P, 0.090, (3000, 6000), 0.6, True),
    "K": (_P, 0.090, (1500, 3000), 0.6, False),
    "G": (_P, 0.090, (1500, 3000), 0.6, True),
    "CH": (_A, 0.130, (2200, 4000), 0.4, False),
    "JH": (_A, 0.130, (2200, 4000), 0.4, True),
}

VOICING_HZ = 140.0
CROSSFADE = 0.005
WORD_GAP = 0.120
EDGE_SILENCE = 0.100
DITHER = 1e-4
PEAK_RANGE = (0.8, 0.9)
RATE_JITTER = 0.10


def _band_noise(rng, n: int, band, sr: int) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / sr)
    spec[(freqs < band[0]) | (freqs > band[1])] = 0.0
    out = np.fft.irfft(spec, n)
    rms = np.sqrt(np.mean(out ** 2))
    return out / rms if rms > 0 else out


def _tones(n: int, freqs, sr: int) -> np.ndarray:
    if len(freqs) == 2:
        f1, f2 = np.full(n, freqs[0]), np.full(n, freqs[1])
    else:  # glide (diphthong): start pair -> end pair
        ramp = np.linspace(0.0, 1.0, n)
        f1 = freqs[0] + (freqs[2] - freqs[0]) * ramp
        f2 = freqs[1] + (freqs[3] - freqs[1]) * ramp
    ph1 = 2 * np.pi * np.cumsum(f1) / sr
    ph2 = 2 * np.pi * np.cumsum(f2) / sr
    return np.sin(ph1) + 0.6 * np.sin(ph2)


def _envelope(n: int, ramp: int) -> np.ndarray:
    env = np.ones(n)
    ramp = min(ramp, n // 2)
    if ramp > 0:
        rise = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        env[:ramp] = rise
        env[n - ramp:] = rise[::-1]
    return env


def phone_waveform(phone: str, rng: np.random.Generator, rate: float = 1.0,
                   sr: int = SAMPLE_RATE) -> np.ndarray:
    """One phoneme template, 80-160 ms depending on class and speaking rate."""
    kind, base, spec, amp, voiced = PHONE_TABLE[phone]
    n = int(round(base * rate * sr))
    voicing = 0.25 * np.sin(2 * np.pi * VOICING_HZ * np.arange(n) / sr) if voiced else 0.0
    if kind in (_V, _S):
        sig = _tones(n, spec, sr)
        if kind == _S:
            sig = sig * (1.0 - 0.6 * (0.5 + 0.5 * np.cos(2 * np.pi * 25.0 * np.arange(n) / sr)))
        sig = amp * sig / 1.6
    elif kind == _F:
        sig = amp * _band_noise(rng, n, spec, sr) + voicing
    elif kind == _P:
        closure = int(0.6 * n)
        burst = np.zeros(n)
        burst[closure:] = amp * _band_noise(rng, n - closure, spec, sr) * np.linspace(1.0, 0.2, n - closure)
        sig = burst + (voicing * (np.arange(n) < closure) if voiced else 0.0)
    else:  # affricate: short closure then frication
        closure = int(0.3 * n)
        fric = np.zeros(n)
        fric[closure:] = amp * _band_noise(rng, n - closure, spec, sr)
        sig = fric + (voicing if voiced else 0.0)
    return np.asarray(sig, dtype=np.float64) * _envelope(n, int(0.010 * sr))


def _overlap_concat(segments: Sequence[np.ndarray], fade: int) -> np.ndarray:
    total = sum(len(s) for s in segments) - fade * (len(segments) - 1)
    out = np.zeros(total)
    ramp_in = np.linspace(0.0, 1.0, fade, endpoint=False) if fade else np.zeros(0)
    pos = 0
    for i, seg in enumerate(segments):
        seg = seg.copy()
        if fade and i > 0:
            seg[:fade] *= ramp_in
        if fade and i < len(segments) - 1:
            seg[-fade:] *= ramp_in[::-1]
        out[pos:pos + len(seg)] += seg
        pos += len(seg) - fade
    return out


def synthesize_utterance(words: Sequence[str], dictionary: G2pDictionary,
                         rng: np.random.Generator, sr: int = SAMPLE_RATE) -> Waveform:
    rate = 1.0 + rng.uniform(-RATE_JITTER, RATE_JITTER)
    fade = int(CROSSFADE * sr)
    gap = np.zeros(int(WORD_GAP * rate * sr) + fade)
    edge = np.zeros(int(EDGE_SILENCE * sr) + fade)
    segments = [edge]
    for i, word in enumerate(words):
        if i:
            segments.append(gap)
        segments.extend(phone_waveform(p, rng, rate, sr) for p in dictionary.lookup(word))
    segments.append(edge)
    sig = _overlap_concat(segments, fade)
    sig *= rng.uniform(*PEAK_RANGE) / np.max(np.abs(sig))
    sig += DITHER * rng.standard_normal(sig.shape[0])
    return Waveform(np.clip(sig, -1.0, 1.0), sr)


def synth_corpus(vocab: Sequence[str], n_utterances: int, words_per_utt: tuple[int, int],
                 seed: int, out_dir, dictionary: G2pDictionary, name: str = "train") -> Path:
    """Write ``n_utterances`` synthetic WAVs plus ``<name>.jsonl`` under ``out_dir``.

    Each utterance is ``words_per_utt[0]..words_per_utt[1]`` words drawn
    uniformly from ``vocab``; audio is fully determined by (seed, index).
    """
    missing = [w for w in vocab if w not in dictionary]
    if missing:
        raise CorpusError(f"vocabulary words missing from dictionary: {missing}")
    if not vocab and n_utterances:
        raise CorpusError("empty vocabulary")
    lo, hi = words_per_utt
    if not 1 <= lo <= hi:
        raise ValueError(f"bad words_per_utt range {words_per_utt}")
    out_dir = Path(out_dir)
    audio_dir = out_dir / "audio"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if n_utterances:
            audio_dir.mkdir(exist_ok=True)
    except OSError as exc:
        raise CorpusError(f"cannot create {out_dir}: {exc}") from exc

    rows = []
    for i in range(n_utterances):
        rng = np.random.default_rng([seed, i])
        n_words = int(rng.integers(lo, hi + 1))
        words = [vocab[j] for j in rng.integers(0, len(vocab), n_words)]
        wav = synthesize_utterance(words, dictionary, rng)
        rel = f"audio/{name}_{i:04d}.wav"
        save_wav(wav, out_dir / rel)
        rows.append({"audio": rel, "text": " ".join(words)})
    log.info("synthesized %d utterances into %s", n_utterances, out_dir)
    return write_manifest(out_dir / f"{name}.jsonl", rows)

