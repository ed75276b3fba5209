"""Character vocabulary: two-pass construction, script expansion, serialisation.

Pass 1 scans the raw corpus and collects every (script, token) pair emitted
by preprocessing. The vocabulary is then expanded so that any code point in
an observed script's expansion ranges maps to an in-vocabulary token, which
prevents OOV surprises at inference time. Ids are dense and assigned in
sorted (script, token) order after the reserved PAD/UNK slots, so identical
corpora always yield byte-identical vocabulary files.
"""

from __future__ import annotations

import hashlib
import unicodedata
from pathlib import Path
from typing import Iterable, Iterator

from .scriptkit import (
    ALL_COMPAT_JAMO,
    ROMANISED_SCRIPTS,
    ScriptId,
    TokenSeq,
    TranslitTable,
    default_translit_table,
    preprocess,
)

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<PAD>"
UNK_TOKEN = "<UNK>"

_VOCAB_MAGIC = "# phonotope-vocab v1"

# Ranges used for post-pass expansion. Narrower than the detection ranges:
# only blocks whose characters plausibly occur in place names, filtered to
# letter/mark categories at expansion time.
_EXPANSION_RANGES: dict[ScriptId, tuple[tuple[int, int], ...]] = {
    ScriptId.LATIN: ((0x0041, 0x005A), (0x0061, 0x007A), (0x00C0, 0x024F),
                     (0x1E00, 0x1EFF)),
    ScriptId.CYRILLIC: ((0x0400, 0x04FF), (0x0500, 0x052F)),
    ScriptId.GREEK: ((0x0370, 0x03FF), (0x1F00, 0x1FFF)),
    ScriptId.ARABIC: ((0x0600, 0x06FF),),
    ScriptId.HEBREW: ((0x0590, 0x05FF),),
    ScriptId.DEVANAGARI: ((0x0900, 0x097F),),
    ScriptId.BENGALI: ((0x0980, 0x09FF),),
    ScriptId.TAMIL: ((0x0B80, 0x0BFF),),
    ScriptId.TELUGU: ((0x0C00, 0x0C7F),),
    ScriptId.MALAYALAM: ((0x0D00, 0x0D7F),),
    ScriptId.KANNADA: ((0x0C80, 0x0CFF),),
    ScriptId.GUJARATI: ((0x0A80, 0x0AFF),),
    ScriptId.THAI: ((0x0E00, 0x0E7F),),
    ScriptId.GEORGIAN: ((0x10A0, 0x10FF),),
    ScriptId.ARMENIAN: ((0x0530, 0x058F),),
    # Hangul syllables decompose, so expansion is the full compat Jamo set.
    ScriptId.HANGUL: ((0xAC00, 0xD7A3),),
}


class Vocabulary:
    """Immutable (script, token) -> dense integer id map."""

    def __init__(self, entries: Iterable[tuple[ScriptId, str]]):
        uniq = sorted(set(entries))
        self._ids: dict[tuple[ScriptId, str], int] = {}
        self._records: list[tuple[int, ScriptId, str]] = []
        next_id = 2  # 0 = PAD, 1 = UNK
        for script, token in uniq:
            self._ids[(script, token)] = next_id
            self._records.append((next_id, script, token))
            next_id += 1
        tmp: dict[ScriptId, list[str]] = {}
        for script, token in uniq:
            tmp.setdefault(script, []).append(token)
        self._by_script: dict[ScriptId, tuple[str, ...]] = {
            s: tuple(v) for s, v in tmp.items()
        }

    def __len__(self) -> int:
        return len(self._records) + 2

    def lookup(self, token: str, script: ScriptId) -> int:
        return self._ids.get((script, token), UNK_ID)

    def __contains__(self, key: tuple[ScriptId, str]) -> bool:
        return key in self._ids

    def encode(self, ts: TokenSeq) -> list[int]:
        return [self.lookup(tok, script) for tok, script in ts.tokens]

    def tokens_for_script(self, script: ScriptId) -> tuple[str, ...]:
        """Sorted token partition for one script (noise sampling pool)."""
        return self._by_script.get(script, ())

    def script_counts(self) -> dict[ScriptId, int]:
        return {s: len(v) for s, v in self._by_script.items()}

    # -- serialisation ------------------------------------------------------

    def dumps(self) -> str:
        lines = [_VOCAB_MAGIC, f"# size={len(self)}"]
        lines.append(f"# pad={PAD_ID} unk={UNK_ID}")
        for ident, script, token in self._records:
            lines.append(f"{ident}\t{script.name}\t{token}")
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.dumps().encode("utf-8"))

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        text = Path(path).read_bytes().decode("utf-8")
        lines = text.splitlines()
        if not lines or lines[0] != _VOCAB_MAGIC:
            raise ValueError(f"not a phonotope vocabulary file: {path}")
        entries: list[tuple[ScriptId, str]] = []
        expected = 2
        for line in lines[1:]:
            if line.startswith("#") or not line:
                continue
            ident_s, script_s, token = line.split("\t")
            if int(ident_s) != expected:
                raise ValueError(f"non-dense id sequence in {path}")
            expected += 1
            entries.append((ScriptId[script_s], token))
        return cls(entries)

    def content_hash(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()


def _expansion_tokens(script: ScriptId,
                      table: TranslitTable) -> Iterator[tuple[ScriptId, str]]:
    if script in ROMANISED_SCRIPTS:
        # Image of the transliteration table over this script's code points.
        from .scriptkit import char_script
        for ch in table.domain():
            if char_script(ch) is script:
                mapped = table.lookup(ch)
                if mapped:
                    yield (script, mapped)
        return
    if script is ScriptId.HANGUL:
        for jamo in ALL_COMPAT_JAMO:
            yield (ScriptId.HANGUL, jamo)
        return
    ranges = _EXPANSION_RANGES.get(script)
    if ranges is None:
        return
    for lo, hi in ranges:
        for cp in range(lo, hi + 1):
            ch = chr(cp)
            if unicodedata.category(ch)[0] not in ("L", "M"):
                continue
            try:
                ts = preprocess(ch, table)
            except ValueError:
                continue
            for token, tok_script in ts.tokens:
                if tok_script is script:
                    yield (script, token)


def build_vocab(corpus: Iterable[str],
                expand: bool = True,
                table: TranslitTable | None = None) -> Vocabulary:
    """Single streaming pass over toponym strings, then script expansion."""
    if table is None:
        table = default_translit_table()
    entries: set[tuple[ScriptId, str]] = set()
    observed_scripts: set[ScriptId] = set()
    n = 0
    for name in corpus:
        if not name:
            continue
        n += 1
        for token, script in preprocess(name, table).tokens:
            entries.add((script, token))
            observed_scripts.add(script)
    if n == 0:
        raise ValueError("empty corpus")
    if expand:
        for script in sorted(observed_scripts):
            entries.update(_expansion_tokens(script, table))
    return Vocabulary(entries)


class LangTable:
    """Language code -> dense id map with a reserved UNK slot (id 0)."""

    UNK = "<UNK>"

    def __init__(self, langs: Iterable[str]):
        uniq = sorted({l for l in langs if l})
        self._ids = {self.UNK: 0}
        for i, lang in enumerate(uniq, start=1):
            self._ids[lang] = i
        self._langs = [self.UNK] + uniq

    def __len__(self) -> int:
        return len(self._langs)

    def lookup(self, lang: str | None) -> int:
        if lang is None:
            return 0
        return self._ids.get(lang, 0)

    def codes(self) -> list[str]:
        return list(self._langs)

    def dumps(self) -> str:
        lines = ["# phonotope-langs v1"]
        for i, lang in enumerate(self._langs):
            lines.append(f"{i}\t{lang}")
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.dumps().encode("utf-8"))

    @classmethod
    def load(cls, path: str | Path) -> "LangTable":
        lines = Path(path).read_bytes().decode("utf-8").splitlines()
        if not lines or lines[0] != "# phonotope-langs v1":
            raise ValueError(f"not a phonotope language table: {path}")
        langs = []
        for line in lines[1:]:
            if not line or line.startswith("#"):
                continue
            _, lang = line.split("\t")
            if lang != cls.UNK:
                langs.append(lang)
        return cls(langs)

    def content_hash(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()
