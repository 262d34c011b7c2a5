"""Attack metrics (CER, success rate, dB) and report emission."""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio import Waveform, db_relative, mix
from .corpus import CorpusEntry
from .model import AcousticModel
from .noise import ALIGNED, NoiseClip, inject

SCHEMA = 1
DEFAULT_SUCCESS_THRESHOLD = 0.5


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def cer(reference: str, hypothesis: str) -> float:
    if not reference:
        raise ValueError("CER is undefined for an empty reference")
    return edit_distance(reference, hypothesis) / len(reference)


@dataclass
class EvalRecord:
    utt_id: str
    reference: str
    clean: str
    adversarial: str
    cer_vs_clean: float
    success: bool
    db: float
    cer_clean_vs_reference: float = 0.0


@dataclass
class AttackReport:
    records: list[EvalRecord] = field(default_factory=list)
    label: str = ""
    threshold: float = DEFAULT_SUCCESS_THRESHOLD
    wall_clock_seconds: float = 0.0
    config_hash: str = ""
    model_id: str = ""
    noise_model_id: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def sr(self) -> float:
        return sum(r.success for r in self.records) / self.n if self.records else 0.0

    @property
    def mean_cer(self) -> float:
        return float(np.mean([r.cer_vs_clean for r in self.records])) if self.records else 0.0

    @property
    def mean_db(self) -> float:
        vals = [r.db for r in self.records if np.isfinite(r.db)]
        return float(np.mean(vals)) if vals else float("-inf")

    @property
    def clean_cer(self) -> float:
        return float(np.mean([r.cer_clean_vs_reference for r in self.records])) if self.records else 0.0

    def aggregates(self) -> dict:
        return {"sr": self.sr, "mean_cer": self.mean_cer, "mean_db": self.mean_db,
                "clean_cer": self.clean_cer, "n": self.n}

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["schema"] = SCHEMA
        doc["aggregates"] = self.aggregates()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "AttackReport":
        if doc.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {doc.get('schema')}")
        doc = {k: v for k, v in doc.items() if k not in ("schema", "aggregates")}
        doc["records"] = [EvalRecord(**r) for r in doc["records"]]
        return cls(**doc)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AttackReport):
            return NotImplemented
        return json.dumps(self.to_dict(), sort_keys=True) == json.dumps(other.to_dict(), sort_keys=True)


def _cer_or_length(reference: str, hypothesis: str) -> float:
    # an empty clean transcription has nothing to corrupt: count any output as fully wrong
    if not reference:
        return float(len(hypothesis) > 0)
    return cer(reference, hypothesis)


def evaluate_one(model: AcousticModel, noise: NoiseClip | None, entry: CorpusEntry,
                 threshold: float, clean: str | None = None) -> EvalRecord:
    x = entry.load()
    if clean is None:
        clean = model.transcribe(x)
    if noise is None or len(noise) == 0:
        track = np.zeros(len(x))
    else:
        track = inject(x, noise, ALIGNED)
    adv = model.transcribe(mix(x, Waveform(track, x.sample_rate)))
    score = _cer_or_length(clean, adv)
    ref_cer = cer(entry.transcript, clean) if entry.transcript else 0.0
    level = db_relative(Waveform(track, x.sample_rate), x) if x.peak > 0 else float("nan")
    return EvalRecord(entry.utt_id, entry.transcript, clean, adv, score,
                      bool(score >= threshold), level, ref_cer)


def evaluate(model: AcousticModel, noise: NoiseClip | None, entries: Sequence[CorpusEntry],
             threshold: float = DEFAULT_SUCCESS_THRESHOLD, label: str = "", jobs: int = 1,
             clean_cache: dict | None = None) -> AttackReport:
    """Tile the noise from phase 0 over each utterance and score against F(x).

    ``clean_cache`` maps utt_id -> clean transcription for this model and is
    filled in as a side effect.
    """
    if not entries:
        raise ValueError("empty test corpus")
    if noise is not None and any(len(noise) > len(e.load()) for e in entries):
        raise ValueError("noise clip is longer than a test utterance")
    cache = clean_cache if clean_cache is not None else {}

    def run(entry):
        return evaluate_one(model, noise, entry, threshold, cache.get(entry.utt_id))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run, entries))
    else:
        records = [run(e) for e in entries]
    for r in records:
        cache[r.utt_id] = r.clean
    meta = noise.meta if noise is not None else {}
    return AttackReport(records, label=label, threshold=threshold, model_id=model.model_id,
                        noise_model_id=str(meta.get("model_id", "")),
                        config_hash=str(meta.get("config_hash", "")))


def transfer_eval(noise: NoiseClip, other_model: AcousticModel, entries: Sequence[CorpusEntry],
                  threshold: float = DEFAULT_SUCCESS_THRESHOLD, label: str = "", **kw) -> AttackReport:
    if noise.meta.get("model_id") == other_model.model_id:
        warnings.warn("transfer evaluation against the model the noise was optimized on", stacklevel=2)
    return evaluate(other_model, noise, entries, threshold, label=label, **kw)


def cross_corpus_eval(model: AcousticModel, noise: NoiseClip, corpora: dict,
                      threshold: float = DEFAULT_SUCCESS_THRESHOLD) -> list[AttackReport]:
    """One report per named held-out corpus, e.g. {"A->B": entries_b}."""
    return [evaluate(model, noise, entries, threshold, label=name) for name, entries in corpora.items()]


def success_rate_curve(report: AttackReport, thresholds: Sequence[float]) -> list[float]:
    scores = np.array([r.cer_vs_clean for r in report.records])
    return [float(np.mean(scores >= t)) if scores.size else 0.0 for t in thresholds]


# -- emission ---------------------------------------------------------------

TABLE_HEADER = ("Method", "Time(mins)", "dB", "SR", "CER")


def format_table(reports: Sequence[AttackReport]) -> str:
    rows = [TABLE_HEADER]
    for r in reports:
        minutes = f"{r.wall_clock_seconds / 60:.2f}" if r.wall_clock_seconds else "-"
        level = f"{r.mean_db:.1f}" if np.isfinite(r.mean_db) else "-"
        rows.append((r.label or "-", minutes, level, f"{r.sr:.2f}", f"{r.mean_cer:.2f}"))
    widths = [max(len(row[i]) for row in rows) for i in range(len(TABLE_HEADER))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def emit_report(reports, path) -> tuple[Path, Path]:
    """Write ``<path>.json`` (all records) and ``<path>.txt`` (one table row per report)."""
    if isinstance(reports, AttackReport):
        reports = [reports]
    path = Path(path)
    stem = path.with_suffix("") if path.suffix in (".json", ".txt") else path
    json_path, txt_path = stem.with_suffix(".json"), stem.with_suffix(".txt")
    doc = {"schema": SCHEMA, "reports": [r.to_dict() for r in reports]}
    json_path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    txt_path.write_text(format_table(reports))
    return json_path, txt_path


def load_reports(path) -> list[AttackReport]:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"unsupported report schema {doc.get('schema')}")
    return [AttackReport.from_dict(r) for r in doc["reports"]]
