import numpy as np
import pytest

from phonemic_attack.corpus import CorpusEntry, ingest, synth_corpus
from phonemic_attack.g2p import default_vocab, load_dictionary


@pytest.fixture(scope="session")
def dictionary():
    return load_dictionary()


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory, dictionary):
    """Eight short synthetic utterances (seed 3)."""
    out = tmp_path_factory.mktemp("small")
    manifest = synth_corpus(default_vocab(), 8, (2, 3), 3, out, dictionary, "train")
    entries, stats = ingest(manifest, dictionary)
    return entries, stats


def make_entry(duration, n_phonemes, peak=0.5, name="u"):
    """Metadata-only entry for sampling tests."""
    from pathlib import Path
    return CorpusEntry(Path(f"/nonexistent/{name}.wav"), "x", float(duration), int(n_phonemes), float(peak),
                       audio=None)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def default_corpus(tmp_path_factory, dictionary):
    """The default desk corpus: 120 train (seed 17) and 40 test (seed 18) utterances."""
    out = tmp_path_factory.mktemp("desk")
    train_m = synth_corpus(default_vocab(), 120, (3, 8), 17, out, dictionary, "train")
    test_m = synth_corpus(default_vocab(), 40, (3, 8), 18, out, dictionary, "test")
    train, train_stats = ingest(train_m, dictionary)
    test, _ = ingest(test_m, dictionary)
    return {"dir": out, "train": train, "test": test, "stats": train_stats}


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, name, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:>2}. {name}: {detail}")
