import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phonemic_attack.evaluation import (
    AttackReport, EvalRecord, cer, edit_distance, emit_report, evaluate, format_table,
    load_reports, success_rate_curve, transfer_eval,
)
from phonemic_attack.model import AcousticModel
from phonemic_attack.noise import NoiseClip, random_clip

from oracles import all_strings, edit_distance_scripts, edit_graph_distances

text = st.text("abc ", max_size=8)


def test_cer_examples():
    assert cer("abc", "abc") == 0.0
    assert cer("abc", "") == 1.0
    assert cer("hello", "hxllo") == pytest.approx(0.2)
    assert cer("ab", "abcdef") == 2.0  # uncapped
    with pytest.raises(ValueError):
        cer("", "abc")


def test_graph_oracle_agrees_with_script_enumeration():
    strings = all_strings("ab", 4)
    dist = edit_graph_distances(strings, "ab")
    for i, a in enumerate(strings):
        for j, b in enumerate(strings):
            assert dist[i, j] == edit_distance_scripts(a, b)


@given(st.text("abcd", max_size=6), st.text("abcd", max_size=6))
def test_edit_distance_matches_script_enumeration(a, b):
    assert edit_distance(a, b) == edit_distance_scripts(a, b)


@given(text.filter(bool), text, text)
def test_cer_concatenation_bound(a, a2, b):
    assert cer(a + b, a2 + b) <= edit_distance(a, a2) / len(a + b) + 1e-12


def _record(c, thr=0.5):
    return EvalRecord("u", "ref", "clean", "adv", c, c >= thr, -33.0)


@given(st.lists(st.floats(0, 3), min_size=1, max_size=20), st.lists(st.floats(0, 2), min_size=2, max_size=6))
def test_sr_monotone_in_threshold(cers, thresholds):
    rep = AttackReport([_record(c) for c in cers])
    curve = success_rate_curve(rep, sorted(thresholds))
    assert all(x >= y for x, y in zip(curve, curve[1:]))
    assert all(0.0 <= v <= 1.0 for v in curve)


def test_report_aggregates():
    rep = AttackReport([_record(0.2), _record(0.7), _record(0.5)])
    assert rep.sr == pytest.approx(2 / 3)
    assert rep.mean_cer == pytest.approx(0.466666666)
    assert AttackReport().sr == 0.0


def test_emit_roundtrip_and_table(tmp_path):
    reps = [AttackReport([_record(0.2), _record(0.9)], label="PAT", wall_clock_seconds=90.0, model_id="m"),
            AttackReport([_record(0.1)], label="Noise")]
    j, t = emit_report(reps, tmp_path / "r.json")
    assert load_reports(j) == reps
    doc = json.loads(j.read_text())
    assert doc["schema"] == 1
    lines = t.read_text().splitlines()
    assert lines[0].split() == ["Method", "Time(mins)", "dB", "SR", "CER"]
    assert len(lines) == 2 + len(reps)
    # table aggregates equal a recomputation from the JSON records
    for line, rdoc in zip(lines[2:], doc["reports"]):
        cells = line.split()
        recs = rdoc["records"]
        sr = sum(r["cer_vs_clean"] >= rdoc["threshold"] for r in recs) / len(recs)
        assert cells[-2] == f"{sr:.2f}"
        assert cells[-1] == f"{np.mean([r['cer_vs_clean'] for r in recs]):.2f}"
    assert "1.50" in lines[2]


def test_schema_checked(tmp_path):
    (tmp_path / "x.json").write_text(json.dumps({"schema": 99, "reports": []}))
    with pytest.raises(ValueError):
        load_reports(tmp_path / "x.json")


def test_format_table_rows():
    out = format_table([AttackReport(label=str(i)) for i in range(4)])
    assert len(out.splitlines()) == 6


@pytest.fixture(scope="module")
def toy_model():
    m = AcousticModel.init(7)
    m.b_out[0] = -3.0  # emit some characters
    return m


def test_evaluate_zero_noise(toy_model, small_corpus):
    entries, _ = small_corpus
    zero = NoiseClip(np.zeros(3200), 0.02)
    rep = evaluate(toy_model, zero, entries)
    assert rep.sr == 0.0 and rep.mean_cer == 0.0
    assert all(r.db == float("-inf") for r in rep.records)
    assert evaluate(toy_model, None, entries).sr == 0.0


def test_evaluate_consistency_and_determinism(toy_model, small_corpus):
    entries, _ = small_corpus
    clip = random_clip(0.3, 0.2, seed=1)
    a = evaluate(toy_model, clip, entries, threshold=0.5)
    b = evaluate(toy_model, clip, entries, threshold=0.5, jobs=3)
    assert a == b
    for r in a.records:
        assert r.success == (r.cer_vs_clean >= 0.5)
    assert a.sr == sum(r.success for r in a.records) / len(a.records)
    assert all(r.db == pytest.approx(20 * np.log10(clip.linf / entries[i].peak_amplitude))
               for i, r in enumerate(a.records))


def test_evaluate_errors(toy_model, small_corpus):
    entries, _ = small_corpus
    with pytest.raises(ValueError):
        evaluate(toy_model, random_clip(0.01, 0.2, 0), [])
    with pytest.raises(ValueError):
        evaluate(toy_model, random_clip(0.01, 60.0, 0), entries)


def test_transfer_same_model_warns(toy_model, small_corpus):
    entries, _ = small_corpus
    clip = random_clip(0.1, 0.2, 2)
    clip.meta["model_id"] = toy_model.model_id
    with pytest.warns(UserWarning):
        t = transfer_eval(clip, toy_model, entries)
    assert t == evaluate(toy_model, clip, entries)
    other = AcousticModel.init(3, "variant")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert transfer_eval(NoiseClip(np.zeros(3200), 0.02), other, entries).sr == 0.0
