"""Dictionary-based grapheme-to-phoneme conversion and phoneme density."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

# stress-stripped ARPAbet
INVENTORY: tuple[str, ...] = (
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH", "EH", "ER", "EY",
    "F", "G", "HH", "IH", "IY", "JH", "K", "L", "M", "N", "NG", "OW", "OY", "P",
    "R", "S", "SH", "T", "TH", "UH", "UW", "V", "W", "Y", "Z", "ZH",
)
_INVENTORY_SET = frozenset(INVENTORY)

LETTER_FALLBACK: Mapping[str, tuple[str, ...]] = MappingProxyType({
    "a": ("AE",), "b": ("B",), "c": ("K",), "d": ("D",), "e": ("EH",),
    "f": ("F",), "g": ("G",), "h": ("HH",), "i": ("IH",), "j": ("JH",),
    "k": ("K",), "l": ("L",), "m": ("M",), "n": ("N",), "o": ("AA",),
    "p": ("P",), "q": ("K", "W"), "r": ("R",), "s": ("S",), "t": ("T",),
    "u": ("AH",), "v": ("V",), "w": ("W",), "x": ("K", "S"), "y": ("Y",),
    "z": ("Z",),
})

_ALLOWED = re.compile(r"[A-Za-z' ]*")


class TranscriptError(ValueError):
    pass


@dataclass(frozen=True)
class G2pDictionary:
    entries: Mapping[str, tuple[str, ...]]
    fallback: Mapping[str, tuple[str, ...]] = field(default=LETTER_FALLBACK)

    def __post_init__(self):
        clean = {}
        for word, phones in self.entries.items():
            phones = tuple(phones)
            if not phones:
                raise ValueError(f"empty pronunciation for {word!r}")
            bad = [p for p in phones if p not in _INVENTORY_SET]
            if bad:
                raise ValueError(f"{word!r}: unknown phonemes {bad}")
            clean[word.lower()] = phones
        object.__setattr__(self, "entries", MappingProxyType(clean))

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.entries

    def lookup(self, word: str) -> tuple[str, ...]:
        word = word.lower()
        hit = self.entries.get(word)
        if hit is not None:
            return hit
        out: list[str] = []
        for ch in word:
            out.extend(self.fallback.get(ch, ()))
        return tuple(out)


def load_dictionary(path=None) -> G2pDictionary:
    """Read a ``WORD<TAB>PH1 PH2 ...`` lexicon; defaults to the bundled one."""
    if path is None:
        text = resources.files(__package__).joinpath("data/lexicon.tsv").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    entries = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            word, phones = line.split("\t")
        except ValueError:
            raise ValueError(f"lexicon line {lineno}: expected WORD<TAB>PHONES") from None
        entries[word.strip()] = tuple(phones.split())
    return G2pDictionary(entries)


def default_vocab() -> list[str]:
    text = resources.files(__package__).joinpath("data/vocab.txt").read_text("utf-8")
    return text.split()


def to_phonemes(dictionary: G2pDictionary, transcript: str) -> tuple[str, ...]:
    if not _ALLOWED.fullmatch(transcript):
        bad = sorted(set(re.sub(r"[A-Za-z' ]", "", transcript)))
        raise TranscriptError(f"transcript has characters outside letters/apostrophe/space: {bad}")
    out: list[str] = []
    for word in transcript.split():
        out.extend(dictionary.lookup(word))
    return tuple(out)


def phoneme_count(dictionary: G2pDictionary, transcript: str) -> int:
    return len(to_phonemes(dictionary, transcript))


def phoneme_density(dictionary: G2pDictionary, transcript: str, duration: float) -> float:
    """Phonemes per second of audio."""
    if not duration > 0:
        raise ValueError(f"duration must be positive, got {duration}")
    return phoneme_count(dictionary, transcript) / duration
