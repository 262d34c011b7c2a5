import hashlib
import json

import pytest

from phonemic_attack.cli import build_parser, main
from phonemic_attack.evaluation import load_reports

TINY_ATTACK = ["--k-instances", "2", "--epochs", "1", "--iters", "2", "--crop-seconds", "0.5",
               "--l-delta-p", "0.05", "--beta", "0.0193", "--alpha", "50"]


def _digest(paths):
    h = hashlib.sha256()
    for p in sorted(paths):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(out), "--n-train", "6", "--n-test", "3", "--words", "2", "3"]) == 0
    assert main(["train", "--out", str(out), "--epochs", "2"]) == 0
    return out


def test_synth_is_reproducible(workdir, tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--n-train", "6", "--n-test", "3", "--words", "2", "3"]) == 0
    files = lambda d: [p for p in d.rglob("*") if p.is_file() and p.suffix in (".wav", ".jsonl")]
    assert _digest(files(workdir)) == _digest(files(tmp_path))


def test_config_snapshot(workdir):
    doc = json.loads((workdir / "config.json").read_text())
    assert doc["synth"]["seed"] == 17 and doc["synth"]["n_train"] == 6
    assert doc["train"]["epochs"] == 2


def test_stats_and_sample(workdir, capsys):
    assert main(["stats", "--out", str(workdir)]) == 0
    stats = json.loads((workdir / "stats.json").read_text())
    assert stats["n_entries"] == 6 and stats["avg_density"] > 0
    assert main(["sample", "--out", str(workdir), "--alpha", "50", "--k", "2"]) == 0
    assert len((workdir / "selected.jsonl").read_text().splitlines()) == 2
    assert main(["sample", "--out", str(workdir), "--alpha", "1e-9"]) == 1
    assert "smallest deviation" in capsys.readouterr().err


def test_attack_eval_pipeline(workdir):
    assert main(["attack", "--out", str(workdir), "--check-constraint", *TINY_ATTACK]) == 0
    assert (workdir / "noise.wav").exists() and (workdir / "noise.json").exists()
    side = json.loads((workdir / "noise.json").read_text())
    assert side["l_delta_p"] == 0.05 and side["beta"] == 0.0193
    assert main(["eval", "--out", str(workdir), "--noise", "noise.wav", "--gaussian"]) == 0
    reports = load_reports(workdir / "eval_report.json")
    assert [r.label for r in reports] == ["Raw", "PAT", "Noise"]
    for r in reports:
        assert 0.0 <= r.sr <= 1.0 and r.mean_cer >= 0.0
    assert len((workdir / "eval_report.txt").read_text().splitlines()) == 5


def test_ablate_has_four_rows(workdir):
    assert main(["ablate", "--out", str(workdir), "--n-seeds", "1", *TINY_ATTACK]) == 0
    reports = load_reports(workdir / "ablation.json")
    assert len(reports) == 4
    assert [r.label for r in reports] == ["PDBS ✗ SPNI ✗", "PDBS ✓ SPNI ✗", "PDBS ✗ SPNI ✓", "PDBS ✓ SPNI ✓"]
    assert len((workdir / "ablation.txt").read_text().splitlines()) == 6


def test_spectrogram(workdir):
    assert main(["spectrogram", "--out", str(workdir), "--audio", "audio/test_0000.wav",
                 "--noise", "noise.wav", "--image", "s.pgm"]) == 0
    assert (workdir / "s.pgm").read_bytes().startswith(b"P5\n")


def test_flags_mirror_attack_config():
    from dataclasses import fields
    from phonemic_attack.attack import AttackConfig
    args = build_parser().parse_args(["attack"])
    assert {f.name for f in fields(AttackConfig)} <= set(vars(args))


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["attack", "--no-such-flag"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_missing_input_is_reported(tmp_path, capsys):
    assert main(["train", "--out", str(tmp_path), "--manifest", "nope.jsonl"]) == 1
    assert "error" in capsys.readouterr().err
