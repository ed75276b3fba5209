"""Grapheme-to-phoneme transcription and articulatory feature extraction.

The Teacher pathway needs an IPA transcription per toponym plus a fixed
24-dimensional binary articulatory vector per phoneme. Transcription is
pluggable: a small set of bundled rule tables covers the demonstration
languages, and a precomputed-IPA overlay file can supply transcriptions
for anything else (keyed by toponym id, taking precedence over rules).
Unsupported languages yield ``None`` rather than an error; such toponyms
are simply excluded from Teacher training.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .scriptkit import decompose_hangul, is_hangul_syllable

_DATA_DIR = Path(__file__).parent / "data"

FEATURE_DIM = 24

FEATURE_NAMES = (
    "syl", "son", "cons", "cont", "delrel", "lat", "nas", "strid",
    "voi", "sg", "cg", "ant", "cor", "distr", "lab", "hi",
    "lo", "back", "round", "velaric", "tense", "long", "hitone", "hireg",
)

IpaSeq = list[str]


class PhoneticsError(ValueError):
    pass


class FeatureTable:
    """IPA segment -> 24-bit articulatory vector, loaded from a data file."""

    def __init__(self, path: str | Path = _DATA_DIR / "feature_table.tsv"):
        self._table: dict[str, np.ndarray] = {}
        self.unknown_segments = 0
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                try:
                    segment, bits = line.split("\t")
                    values = [int(b) for b in bits.split(" ")]
                except ValueError as exc:
                    raise PhoneticsError(f"{path}:{lineno}: malformed row") from exc
                if len(values) != FEATURE_DIM or any(v not in (0, 1) for v in values):
                    raise PhoneticsError(
                        f"{path}:{lineno}: expected {FEATURE_DIM} binary values")
                self._table[segment] = np.array(values, dtype=np.uint8)

    def __contains__(self, segment: str) -> bool:
        return segment in self._table

    def __len__(self) -> int:
        return len(self._table)

    def segments(self) -> list[str]:
        return sorted(self._table)

    def lookup(self, segment: str) -> np.ndarray | None:
        return self._table.get(segment)

    def features(self, ipa: IpaSeq) -> np.ndarray:
        """Per-segment lookup; unknown segments are dropped and counted.

        Raises PhoneticsError when no segment resolves (such toponyms are
        excluded from Teacher training).
        """
        if not ipa:
            raise PhoneticsError("no phonetic features")
        rows = []
        for segment in ipa:
            vec = self._table.get(segment)
            if vec is None:
                self.unknown_segments += 1
                continue
            rows.append(vec)
        if not rows:
            raise PhoneticsError("no phonetic features")
        return np.stack(rows)


class RuleTable:
    """One language's transcription rules.

    ``grapheme`` mode applies greedy longest-match over the case-folded
    text; ``jamo`` mode first decomposes Hangul syllables and looks up
    positional (lead/vowel/tail) readings. A rule output of ``-`` means
    the grapheme is silent.
    """

    def __init__(self, lang: str, path: str | Path):
        self.lang = lang
        self.mode = "grapheme"
        rules: dict[str, list[str]] = {}
        positional: dict[tuple[str, str], list[str]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#"):
                    if "mode=jamo" in line:
                        self.mode = "jamo"
                    continue
                parts = line.split("\t")
                if len(parts) == 2:
                    grapheme, segs = parts
                    rules[grapheme] = [] if segs == "-" else segs.split()
                elif len(parts) == 3 and parts[2] in ("lead", "vowel", "tail"):
                    grapheme, segs, context = parts
                    positional[(context, grapheme)] = (
                        [] if segs == "-" else segs.split())
                else:
                    raise PhoneticsError(f"{path}:{lineno}: malformed rule")
        if not rules and not positional:
            raise PhoneticsError(f"{path}: empty rule table")
        self._rules = rules
        self._positional = positional
        self._keys_by_len = sorted(rules, key=len, reverse=True)
        self._max_key = max((len(k) for k in rules), default=1)

    def apply(self, text: str) -> IpaSeq:
        text = unicodedata.normalize("NFC", text).casefold()
        if self.mode == "jamo":
            return self._apply_jamo(text)
        out: list[str] = []
        i = 0
        n = len(text)
        while i < n:
            matched = False
            for width in range(min(self._max_key, n - i), 0, -1):
                segs = self._rules.get(text[i:i + width])
                if segs is not None:
                    out.extend(segs)
                    i += width
                    matched = True
                    break
            if not matched:
                i += 1  # unmapped character (space, hyphen, foreign letter)
        return out

    def _apply_jamo(self, text: str) -> IpaSeq:
        out: list[str] = []
        for ch in text:
            if not is_hangul_syllable(ch):
                continue
            jamo = decompose_hangul(ch)
            out.extend(self._positional.get(("lead", jamo[0]), []))
            out.extend(self._positional.get(("vowel", jamo[1]), []))
            if len(jamo) == 3:
                out.extend(self._positional.get(("tail", jamo[2]), []))
        return out


@dataclass
class G2pProvider:
    """Rule tables per language plus a precomputed-IPA overlay by toponym id."""

    tables: dict[str, RuleTable] = field(default_factory=dict)
    overlay: dict[int, IpaSeq] = field(default_factory=dict)

    def supports(self, lang: str | None) -> bool:
        return lang is not None and lang in self.tables

    def languages(self) -> list[str]:
        return sorted(self.tables)

    def transcribe(self, text: str, lang: str | None,
                   toponym_id: int | None = None) -> IpaSeq | None:
        """IPA segments, or None when the language is unsupported.

        The overlay takes precedence over rule tables so that externally
        transcribed corpora can be mixed with the bundled languages.
        """
        if toponym_id is not None and toponym_id in self.overlay:
            return list(self.overlay[toponym_id])
        if not self.supports(lang):
            return None
        return self.tables[lang].apply(text)

    def add_overlay_file(self, path: str | Path) -> int:
        """Load 'toponym-id TAB space-separated-segments' lines."""
        count = 0
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                try:
                    ident, segs = line.split("\t")
                    self.overlay[int(ident)] = segs.split()
                except ValueError as exc:
                    raise PhoneticsError(
                        f"{path}:{lineno}: malformed overlay row") from exc
                count += 1
        return count


def load_bundled_provider(langs: list[str] | None = None) -> G2pProvider:
    """Provider with the bundled demonstration rule tables."""
    g2p_dir = _DATA_DIR / "g2p"
    tables = {}
    for path in sorted(g2p_dir.glob("*.tsv")):
        lang = path.stem
        if langs is not None and lang not in langs:
            continue
        tables[lang] = RuleTable(lang, path)
    return G2pProvider(tables=tables)


def coverage(corpus, provider: G2pProvider, table: FeatureTable) -> float:
    """Fraction of toponyms with a usable (transcribable, featurised) form.

    ``corpus`` yields objects with .id, .name and .lang attributes, or
    (id, name, lang) tuples.
    """
    total = 0
    usable = 0
    for item in corpus:
        if isinstance(item, tuple):
            ident, name, lang = item
        else:
            ident, name, lang = item.id, item.name, item.lang
        total += 1
        ipa = provider.transcribe(name, lang, ident)
        if not ipa:
            continue
        try:
            table.features(ipa)
        except PhoneticsError:
            continue
        usable += 1
    return usable / total if total else 0.0
