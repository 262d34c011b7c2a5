"""Phoneme-level universal adversarial noise against a small CTC recognizer."""

from .attack import AttackConfig, ablation_arm, ablation_grid, baseline_gaussian, generate
from .audio import Waveform, load_wav, save_wav
from .corpus import CorpusEntry, dataset_stats, ingest, synth_corpus
from .evaluation import AttackReport, cer, emit_report, evaluate, transfer_eval
from .model import AcousticModel, TrainConfig, load_checkpoint, save_checkpoint, train
from .noise import NoiseClip, SlideSchedule, fold_gradient, inject, project_linf

__version__ = "0.1.0"

__all__ = [
    "AcousticModel", "AttackConfig", "AttackReport", "CorpusEntry", "NoiseClip", "SlideSchedule",
    "TrainConfig", "Waveform", "ablation_arm", "ablation_grid", "baseline_gaussian", "cer",
    "dataset_stats", "emit_report", "evaluate", "fold_gradient", "generate", "ingest", "inject",
    "load_checkpoint", "load_wav", "project_linf", "save_checkpoint", "save_wav", "synth_corpus",
    "train", "transfer_eval",
]
