"""Phonemic universal noise optimization and baseline noise.

The loop: select a few density-balanced utterances, then for every epoch,
utterance and inner iteration slide the tiled clip to a new phase, mix it
in, optionally reverberate, and take a signed gradient *ascent* step on the
CTC loss of the model's own clean transcription, projecting back into the
l-inf ball after each step.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .audio import SAMPLE_RATE
from .corpus import CorpusEntry, DatasetStats, dataset_stats
from .ctc import ctc_loss, encode, greedy_decode
from .evaluation import AttackReport, evaluate
from .features import log_mel_with_pullback, log_mel_forward
from .audio import Waveform
from .model import AcousticModel
from .noise import (
    DEFAULT_EPSILON, NoiseClip, SlideSchedule, clip_samples, fold_gradient, inject,
    project_linf, random_clip,
)
from .rir import RoomImpulse, convolve, identity_rir, make_rir, rir_backward
from .sampling import SamplingConfig, select

log = logging.getLogger(__name__)


class AttackError(RuntimeError):
    pass


class ConstraintViolation(AssertionError):
    pass


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = DEFAULT_EPSILON
    l_delta_p: float = 0.20
    alpha: float = 0.2
    beta: float = 0.77
    k_instances: int = 10
    epochs: int = 20
    iters: int = 50
    step_size: float | None = None  # defaults to epsilon / 10
    seed: int = 0
    rir_enabled: bool = True
    rir_prob: float = 0.5
    rt60_min: float = 0.1
    rt60_max: float = 0.5
    crop_seconds: float = 2.0
    use_pdbs: bool = True
    check_constraint: bool = False

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if not self.l_delta_p > 0:
            raise ValueError("l_delta_p must be positive")
        if self.iters < 1 or self.epochs < 1:
            raise ValueError("epochs and iters must be at least 1")
        if not 0.0 <= self.rir_prob <= 1.0:
            raise ValueError("rir_prob must lie in [0, 1]")
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def step(self) -> float:
        return self.epsilon / 10.0 if self.step_size is None else self.step_size

    @property
    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def aligned_beta(cfg: AttackConfig) -> float:
    """Nearest nonzero multiple of the clip length: every phase is then zero."""
    clip = clip_samples(cfg.l_delta_p)
    mult = max(1, int(round(clip_samples(cfg.beta) / clip)))
    return mult * clip / SAMPLE_RATE


def ablation_arm(cfg: AttackConfig, pdbs_on: bool, spni_on: bool) -> AttackConfig:
    out = replace(cfg, use_pdbs=bool(pdbs_on))
    if not spni_on:
        out = replace(out, beta=aligned_beta(cfg))
    return out


def baseline_gaussian(epsilon: float, length: int, seed: int, sample_rate: int = SAMPLE_RATE) -> NoiseClip:
    """White Gaussian noise rescaled so its peak equals ``epsilon`` exactly."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(length)
    peak = np.max(np.abs(g)) if length else 0.0
    delta = g * (epsilon / peak) if peak > 0 and epsilon > 0 else np.zeros(length)
    return NoiseClip(delta, epsilon, sample_rate,
                     {"seed": seed, "l_delta_p": length / sample_rate, "model_id": "", "kind": "gaussian"})


def training_set(entries: Sequence[CorpusEntry], stats: DatasetStats | None,
                 cfg: AttackConfig) -> list[CorpusEntry]:
    if not cfg.use_pdbs:
        return list(entries)
    stats = stats or dataset_stats(entries)
    return select(entries, stats, SamplingConfig(cfg.alpha, cfg.k_instances))


class _Crops:
    """Fixed-length training windows and their cached clean labels.

    Offsets are multiples of the clip length, so the noise/speech alignment is
    governed by the sliding schedule alone.
    """

    def __init__(self, model: AcousticModel, waves: Sequence[Waveform], crop_len: int, clip_len: int):
        self.model = model
        self.waves = waves
        self.crop_len = crop_len
        self.clip_len = clip_len
        self.labels: dict[tuple[int, int], np.ndarray] = {}

    def offsets(self, i: int) -> int:
        spare = len(self.waves[i]) - self.crop_len
        return spare // self.clip_len + 1 if spare > 0 else 1

    def window(self, i: int, slot: int) -> tuple[np.ndarray, np.ndarray]:
        x = self.waves[i].samples
        start = slot * self.clip_len
        seg = x[start:start + self.crop_len]
        if seg.shape[0] < self.crop_len:
            seg = np.pad(seg, (0, self.crop_len - seg.shape[0]))
        key = (i, slot)
        if key not in self.labels:
            logits = self.model.forward(log_mel_forward(Waveform(seg)).values)
            self.labels[key] = encode(greedy_decode(logits))
        return seg, self.labels[key]


def loss_and_clip_grad(model: AcousticModel, x: np.ndarray, label: np.ndarray, clip: NoiseClip,
                       sched: SlideSchedule, rir: RoomImpulse) -> tuple[float, np.ndarray]:
    """CTC loss on R(x + A_n(x, clip)) and its gradient w.r.t. the clip samples."""
    track = inject(x.shape[0], clip, sched)
    raw = x + track
    mixed = np.clip(raw, -1.0, 1.0)
    heard_raw = convolve(mixed, rir.taps)
    heard = np.clip(heard_raw, -1.0, 1.0)

    feats, pullback = log_mel_with_pullback(Waveform(heard))
    logits, cache = model.forward(feats.values, cache=True)
    loss, dlogits = ctc_loss(logits, label)
    dfeats, _ = model.backward(cache, dlogits, want_params=False)
    g = pullback(dfeats)
    g = g * (np.abs(heard_raw) <= 1.0)
    g = rir_backward(g, rir)
    g = g * (np.abs(raw) <= 1.0)
    return loss, fold_gradient(g, len(clip), sched, clip.sample_rate)


def generate(model: AcousticModel, entries: Sequence[CorpusEntry], cfg: AttackConfig,
             stats: DatasetStats | None = None,
             on_step: Callable[[int, float, NoiseClip], None] | None = None) -> tuple[NoiseClip, AttackReport]:
    """Optimize a universal phonemic noise clip against ``model``.

    Returns the clip and a report holding the wall-clock time, the loss trace
    and the attack's effect on its own training utterances.
    """
    t0 = time.perf_counter()
    train = training_set(entries, stats, cfg)
    if not train:
        raise AttackError("empty training set")
    clip_len = clip_samples(cfg.l_delta_p)
    crop_len = clip_samples(cfg.crop_seconds)
    if clip_len > crop_len:
        raise AttackError("noise clip longer than the training window")

    clip = random_clip(cfg.epsilon, cfg.l_delta_p, cfg.seed)
    clip.meta.update(model_id=model.model_id, config_hash=cfg.config_hash, beta=cfg.beta, kind="pat")
    crops = _Crops(model, [e.load() for e in train], crop_len, clip_len)
    rng_crop = np.random.default_rng([cfg.seed, 1])
    rng_rir = np.random.default_rng([cfg.seed, 2])
    sched = SlideSchedule(cfg.beta)
    no_rir = identity_rir()
    losses: list[float] = []
    violations = 0
    n = 0
    for epoch in range(cfg.epochs):
        for i in range(len(train)):
            slot = int(rng_crop.integers(crops.offsets(i)))
            x, label = crops.window(i, slot)
            for _ in range(cfg.iters):
                n += 1
                rir = no_rir
                if cfg.rir_enabled and rng_rir.random() < cfg.rir_prob:
                    rt60 = float(rng_rir.uniform(cfg.rt60_min, cfg.rt60_max))
                    rir = make_rir(rt60, int(rng_rir.integers(2 ** 31)))
                loss, grad = loss_and_clip_grad(model, x, label, clip, sched.at(n), rir)
                if not np.isfinite(loss):
                    raise AttackError(f"non-finite loss at step {n}")
                losses.append(loss)
                clip = project_linf(clip.with_delta(clip.delta + cfg.step * np.sign(grad)))
                if cfg.check_constraint and clip.linf > cfg.epsilon:
                    violations += 1
                    raise ConstraintViolation(f"step {n}: |delta|_inf={clip.linf} > {cfg.epsilon}")
                if on_step is not None:
                    on_step(n, loss, clip)
        log.info("epoch %d/%d mean loss %.3f", epoch + 1, cfg.epochs,
                 float(np.mean(losses[-len(train) * cfg.iters:])))
    elapsed = time.perf_counter() - t0

    report = evaluate(model, clip, train, label="PAT (train)")
    report.wall_clock_seconds = elapsed
    report.config_hash = cfg.config_hash
    quarter = max(1, len(losses) // 4)
    report.extra = {
        "config": asdict(cfg),
        "selected": [e.utt_id for e in train],
        "steps": n,
        "violations": violations,
        "loss_first_quarter": float(np.mean(losses[:quarter])),
        "loss_last_quarter": float(np.mean(losses[-quarter:])),
        "losses": [float(v) for v in losses],
    }
    return clip, report


# -- experiment drivers -------------------------------------------------------

ABLATION_ARMS = ((False, False), (True, False), (False, True), (True, True))


def _arm_label(pdbs: bool, spni: bool) -> str:
    return f"PDBS {'✓' if pdbs else '✗'} SPNI {'✓' if spni else '✗'}"


def pooled_report(reports: Sequence[AttackReport], label: str) -> AttackReport:
    """Concatenate per-seed reports; SR and mean CER become seed averages for equal test sets."""
    records = [r for rep in reports for r in rep.records]
    wall = float(np.mean([r.wall_clock_seconds for r in reports])) if reports else 0.0
    out = AttackReport(records, label=label, threshold=reports[0].threshold if reports else 0.5,
                       wall_clock_seconds=wall, model_id=reports[0].model_id if reports else "")
    out.extra = {"per_seed": [{"sr": r.sr, "mean_cer": r.mean_cer, "seconds": r.wall_clock_seconds}
                              for r in reports]}
    return out


def ablation_grid(model: AcousticModel, train_entries: Sequence[CorpusEntry],
                  test_entries: Sequence[CorpusEntry], cfg: AttackConfig, seeds: Sequence[int],
                  threshold: float = 0.5) -> list[AttackReport]:
    """The 2x2 PDBS x SPNI grid, one pooled report per arm (seed-averaged)."""
    stats = dataset_stats(train_entries)
    clean_cache: dict = {}
    rows = []
    for pdbs, spni in ABLATION_ARMS:
        per_seed = []
        for seed in seeds:
            arm = ablation_arm(replace(cfg, seed=seed), pdbs, spni)
            clip, gen = generate(model, train_entries, arm, stats)
            rep = evaluate(model, clip, test_entries, threshold, clean_cache=clean_cache)
            rep.wall_clock_seconds = gen.wall_clock_seconds
            per_seed.append(rep)
        rows.append(pooled_report(per_seed, _arm_label(pdbs, spni)))
    return rows


def hyperparameter_sweep(model: AcousticModel, train_entries: Sequence[CorpusEntry],
                         test_entries: Sequence[CorpusEntry], cfg: AttackConfig, param: str,
                         values: Sequence[float], threshold: float = 0.5) -> list[AttackReport]:
    """Re-run the attack for each value of one of l_delta_p / alpha / beta."""
    if param not in ("l_delta_p", "alpha", "beta"):
        raise ValueError(f"cannot sweep {param!r}")
    stats = dataset_stats(train_entries)
    clean_cache: dict = {}
    rows = []
    for v in values:
        clip, gen = generate(model, train_entries, replace(cfg, **{param: v}), stats)
        rep = evaluate(model, clip, test_entries, threshold, label=f"{param}={v:g}", clean_cache=clean_cache)
        rep.wall_clock_seconds = gen.wall_clock_seconds
        rows.append(rep)
    return rows
