import hashlib
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from phonemic_attack.audio import Waveform, save_wav
from phonemic_attack.corpus import (
    PHONE_TABLE, CorpusError, EmptyCorpusError, dataset_stats, ingest, read_manifest,
    synth_corpus, synthesize_utterance, write_manifest,
)
from phonemic_attack.g2p import INVENTORY, default_vocab, phoneme_count

from conftest import make_entry


def _tree_digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_pooled_density_not_mean_of_ratios():
    stats = dataset_stats([make_entry(1.0, 3), make_entry(2.0, 3)])
    assert stats.avg_density == 2.0
    assert stats.total_phonemes == 6 and stats.total_duration == 3.0 and stats.n_entries == 2


def test_single_entry_density():
    e = make_entry(1.7, 9)
    assert dataset_stats([e]).avg_density == pytest.approx(e.density)


def test_empty_stats():
    with pytest.raises(EmptyCorpusError):
        dataset_stats([])


entry_lists = st.lists(st.tuples(st.floats(0.5, 5.0), st.integers(0, 60)), min_size=1, max_size=12)


@given(entry_lists, st.randoms())
def test_density_permutation_invariant_and_bounded(specs, rnd):
    entries = [make_entry(d, n) for d, n in specs]
    d = dataset_stats(entries).avg_density
    shuffled = entries[:]
    rnd.shuffle(shuffled)
    assert dataset_stats(shuffled).avg_density == pytest.approx(d, rel=1e-12)
    dens = [e.density for e in entries]
    assert min(dens) - 1e-12 <= d <= max(dens) + 1e-12


def test_phone_table_covers_inventory():
    assert set(PHONE_TABLE) == set(INVENTORY)


def test_synth_deterministic(tmp_path, dictionary):
    a, b = tmp_path / "a", tmp_path / "b"
    synth_corpus(default_vocab(), 4, (2, 4), 11, a, dictionary)
    synth_corpus(default_vocab(), 4, (2, 4), 11, b, dictionary)
    assert _tree_digest(a) == _tree_digest(b)
    synth_corpus(default_vocab(), 4, (2, 4), 12, b, dictionary)
    assert _tree_digest(a) != _tree_digest(b)


def test_synth_zero_utterances(tmp_path, dictionary):
    m = synth_corpus(default_vocab(), 0, (3, 8), 1, tmp_path / "z", dictionary)
    assert m.read_text() == ""
    assert not (tmp_path / "z" / "audio").exists()
    with pytest.raises(EmptyCorpusError):
        ingest(m, dictionary)


def test_synth_rejects_unknown_vocab(tmp_path, dictionary):
    with pytest.raises(CorpusError):
        synth_corpus(["cat", "xyzzyq"], 1, (1, 1), 0, tmp_path, dictionary)


def test_phoneme_count_matches_dictionary(small_corpus, dictionary):
    entries, _ = small_corpus
    for e in entries:
        expected = sum(len(dictionary.lookup(w)) for w in e.transcript.split())
        assert e.n_phonemes == expected == phoneme_count(dictionary, e.transcript)


def test_synth_audio_properties(small_corpus):
    entries, _ = small_corpus
    for e in entries:
        w = e.load()
        assert w.sample_rate == 16000
        assert 0.75 <= e.peak_amplitude <= 0.91
        assert e.duration == len(w) / 16000


def test_utterance_duration_tracks_phonemes(dictionary):
    rng = np.random.default_rng(0)
    short = synthesize_utterance(["cat"], dictionary, rng)
    long = synthesize_utterance(["cat", "dog", "fish"], dictionary, np.random.default_rng(0))
    assert long.duration > 2 * short.duration - 0.3


def test_manifest_roundtrip_and_errors(tmp_path, dictionary):
    save_wav(Waveform(np.full(1600, 0.1)), tmp_path / "a.wav")
    rows = [{"audio": "a.wav", "text": "cat dog"}]
    m = write_manifest(tmp_path / "m.jsonl", rows)
    assert read_manifest(m) == rows
    entries, stats = ingest(m, dictionary)
    assert entries[0].n_phonemes == 6 and entries[0].duration == 0.1
    assert stats.avg_density == pytest.approx(60.0)

    (tmp_path / "bad.jsonl").write_text(json.dumps({"audio": "a.wav"}) + "\n")
    with pytest.raises(CorpusError):
        ingest(tmp_path / "bad.jsonl", dictionary)
    write_manifest(tmp_path / "missing.jsonl", [{"audio": "gone.wav", "text": "cat"}])
    with pytest.raises(CorpusError):
        ingest(tmp_path / "missing.jsonl", dictionary)


def test_ingest_resamples(tmp_path, dictionary):
    save_wav(Waveform(np.zeros(800), 8000), tmp_path / "lo.wav")
    write_manifest(tmp_path / "m.jsonl", [{"audio": "lo.wav", "text": "cat"}])
    entries, _ = ingest(tmp_path / "m.jsonl", dictionary)
    assert entries[0].load().sample_rate == 16000 and len(entries[0].load()) == 1600
