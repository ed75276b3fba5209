"""Unicode script detection, script-specific preprocessing and romanisation.

Every code point maps to exactly one of 20 script categories via hard-coded
block ranges. Preprocessing turns a toponym into a stream of (token, script)
pairs: CJK and Kana characters are replaced by ASCII transliteration tokens,
Hangul syllables are decomposed into compatibility Jamo, everything else
stays a single character. Romanisation is a separate, table-driven mapping
to lowercase ASCII used for similarity filtering, prefix keys and baselines.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache
from pathlib import Path

_DATA_DIR = Path(__file__).parent / "data"

TRANSLIT_TABLE_FILE = _DATA_DIR / "translit_v1.tsv"


class ScriptId(IntEnum):
    LATIN = 0
    CYRILLIC = 1
    GREEK = 2
    ARABIC = 3
    HEBREW = 4
    DEVANAGARI = 5
    BENGALI = 6
    TAMIL = 7
    TELUGU = 8
    MALAYALAM = 9
    KANNADA = 10
    GUJARATI = 11
    THAI = 12
    GEORGIAN = 13
    ARMENIAN = 14
    CJK = 15
    HIRAGANA = 16
    KATAKANA = 17
    HANGUL = 18
    OTHER = 19


# Contiguous code point ranges per script. CJK punctuation (U+3000 block)
# is deliberately assigned to CJK rather than OTHER.
_SCRIPT_RANGES: dict[ScriptId, tuple[tuple[int, int], ...]] = {
    ScriptId.LATIN: (
        (0x0041, 0x005A), (0x0061, 0x007A), (0x00C0, 0x00D6),
        (0x00D8, 0x00F6), (0x00F8, 0x024F), (0x1E00, 0x1EFF),
        (0x2C60, 0x2C7F), (0xA720, 0xA7FF),
    ),
    ScriptId.CYRILLIC: (
        (0x0400, 0x04FF), (0x0500, 0x052F), (0x2DE0, 0x2DFF),
        (0xA640, 0xA69F),
    ),
    ScriptId.GREEK: ((0x0370, 0x03FF), (0x1F00, 0x1FFF)),
    ScriptId.ARABIC: (
        (0x0600, 0x06FF), (0x0750, 0x077F), (0x08A0, 0x08FF),
        (0xFB50, 0xFDFF), (0xFE70, 0xFEFF),
    ),
    ScriptId.HEBREW: ((0x0590, 0x05FF), (0xFB1D, 0xFB4F)),
    ScriptId.DEVANAGARI: ((0x0900, 0x097F), (0xA8E0, 0xA8FF)),
    ScriptId.BENGALI: ((0x0980, 0x09FF),),
    ScriptId.TAMIL: ((0x0B80, 0x0BFF),),
    ScriptId.TELUGU: ((0x0C00, 0x0C7F),),
    ScriptId.MALAYALAM: ((0x0D00, 0x0D7F),),
    ScriptId.KANNADA: ((0x0C80, 0x0CFF),),
    ScriptId.GUJARATI: ((0x0A80, 0x0AFF),),
    ScriptId.THAI: ((0x0E00, 0x0E7F),),
    ScriptId.GEORGIAN: ((0x10A0, 0x10FF), (0x2D00, 0x2D2F)),
    ScriptId.ARMENIAN: ((0x0530, 0x058F), (0xFB13, 0xFB17)),
    ScriptId.CJK: (
        (0x3000, 0x303F), (0x3400, 0x4DBF), (0x4E00, 0x9FFF),
        (0xF900, 0xFAFF), (0x20000, 0x2A6DF),
    ),
    ScriptId.HIRAGANA: ((0x3040, 0x309F),),
    ScriptId.KATAKANA: ((0x30A0, 0x30FF), (0x31F0, 0x31FF), (0xFF66, 0xFF9D)),
    ScriptId.HANGUL: (
        (0x1100, 0x11FF), (0x3130, 0x318F), (0xA960, 0xA97F),
        (0xAC00, 0xD7FF),
    ),
}

# Scripts with an upper/lower case distinction; only these are case folded.
CASED_SCRIPTS = frozenset({
    ScriptId.LATIN, ScriptId.CYRILLIC, ScriptId.GREEK,
    ScriptId.ARMENIAN, ScriptId.GEORGIAN,
})

# Scripts whose characters are replaced by ASCII transliteration tokens.
ROMANISED_SCRIPTS = frozenset({
    ScriptId.CJK, ScriptId.HIRAGANA, ScriptId.KATAKANA,
})

_RANGE_LOOKUP: list[tuple[int, int, ScriptId]] = sorted(
    (lo, hi, sid) for sid, ranges in _SCRIPT_RANGES.items() for lo, hi in ranges
)


def char_script(ch: str) -> ScriptId:
    """Script category of a single character; OTHER when out of all ranges."""
    cp = ord(ch)
    for lo, hi, sid in _RANGE_LOOKUP:
        if cp < lo:
            break
        if cp <= hi:
            return sid
    return ScriptId.OTHER


def detect_script(text: str) -> ScriptId:
    """Majority script over the characters of ``text``.

    Characters of script OTHER (which covers ASCII punctuation, whitespace
    and digits) are ignored. Ties go to the script occurring first. Returns
    OTHER if no scriptful character exists.

    Raises ValueError on empty input.
    """
    if not text:
        raise ValueError("empty toponym")
    counts: dict[ScriptId, int] = {}
    first_pos: dict[ScriptId, int] = {}
    for i, ch in enumerate(text):
        sid = char_script(ch)
        if sid is ScriptId.OTHER:
            continue
        counts[sid] = counts.get(sid, 0) + 1
        if sid not in first_pos:
            first_pos[sid] = i
    if not counts:
        return ScriptId.OTHER
    best = max(counts.values())
    tied = [sid for sid, n in counts.items() if n == best]
    return min(tied, key=lambda sid: first_pos[sid])


# ---------------------------------------------------------------------------
# Hangul syllable arithmetic (U+AC00..U+D7A3), compatibility Jamo output.

_HANGUL_BASE = 0xAC00
_HANGUL_END = 0xD7A3
_N_VOWELS = 21
_N_TAILS = 28  # tail index 0 = no tail

_LEADS = "ㄱㄲㄴㄷㄸㄹㅁㅂㅃㅅㅆㅇㅈㅉㅊㅋㅌㅍㅎ"
_VOWELS = "ㅏㅐㅑㅒㅓㅔㅕㅖㅗㅘㅙㅚㅛㅜㅝㅞㅟㅠㅡㅢㅣ"
_TAILS = "ㄱㄲㄳㄴㄵㄶㄷㄹㄺㄻㄼㄽㄾㄿㅀㅁㅂㅄㅅㅆㅇㅈㅊㅋㅌㅍㅎ"  # index 1..27

_LEAD_INDEX = {ch: i for i, ch in enumerate(_LEADS)}
_VOWEL_INDEX = {ch: i for i, ch in enumerate(_VOWELS)}
_TAIL_INDEX = {ch: i + 1 for i, ch in enumerate(_TAILS)}

ALL_COMPAT_JAMO = tuple(sorted(set(_LEADS) | set(_VOWELS) | set(_TAILS)))


def is_hangul_syllable(ch: str) -> bool:
    return _HANGUL_BASE <= ord(ch) <= _HANGUL_END


def decompose_hangul(ch: str) -> tuple[str, ...]:
    """Split a Hangul syllable into 2-3 compatibility Jamo (lead, vowel[, tail])."""
    cp = ord(ch)
    if not _HANGUL_BASE <= cp <= _HANGUL_END:
        raise ValueError(f"not a Hangul syllable: {ch!r}")
    index = cp - _HANGUL_BASE
    lead = index // (_N_VOWELS * _N_TAILS)
    vowel = (index % (_N_VOWELS * _N_TAILS)) // _N_TAILS
    tail = index % _N_TAILS
    if tail == 0:
        return (_LEADS[lead], _VOWELS[vowel])
    return (_LEADS[lead], _VOWELS[vowel], _TAILS[tail - 1])


def compose_hangul(lead: str, vowel: str, tail: str | None = None) -> str:
    """Inverse of :func:`decompose_hangul`."""
    li = _LEAD_INDEX[lead]
    vi = _VOWEL_INDEX[vowel]
    ti = _TAIL_INDEX[tail] if tail else 0
    return chr(_HANGUL_BASE + (li * _N_VOWELS + vi) * _N_TAILS + ti)


# ---------------------------------------------------------------------------
# Transliteration table (code point -> ASCII), versioned data file.

class TranslitTable:
    """Code point to ASCII mapping with positional Jamo variants.

    File format (tab-separated, '#'-prefixed comment lines):
        U+XXXX <TAB> ascii [<TAB> context]
    where context is one of ``any`` (default), ``lead``, ``vowel``, ``tail``
    and only Jamo entries carry a non-default context.
    """

    def __init__(self, path: Path = TRANSLIT_TABLE_FILE):
        self.version = ""
        self._any: dict[str, str] = {}
        self._lead: dict[str, str] = {}
        self._vowel: dict[str, str] = {}
        self._tail: dict[str, str] = {}
        by_context = {"any": self._any, "lead": self._lead,
                      "vowel": self._vowel, "tail": self._tail}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#"):
                    if line.startswith("# version="):
                        self.version = line.split("=", 1)[1].strip()
                    continue
                parts = line.split("\t")
                if len(parts) not in (2, 3):
                    raise ValueError(f"{path}:{lineno}: malformed entry")
                cp = int(parts[0].removeprefix("U+"), 16)
                ascii_out = parts[1]
                if not ascii_out.isascii() or ascii_out != ascii_out.lower():
                    raise ValueError(
                        f"{path}:{lineno}: mapping must be lowercase ASCII")
                context = parts[2] if len(parts) == 3 else "any"
                by_context[context][chr(cp)] = ascii_out

    def lookup(self, ch: str, context: str = "any") -> str | None:
        if context == "lead":
            hit = self._lead.get(ch)
        elif context == "vowel":
            hit = self._vowel.get(ch)
        elif context == "tail":
            hit = self._tail.get(ch)
        else:
            hit = None
        if hit is None:
            hit = self._any.get(ch)
        return hit

    def domain(self) -> set[str]:
        """All characters with at least one mapping."""
        return set(self._any) | set(self._lead) | set(self._vowel) | set(self._tail)


@lru_cache(maxsize=1)
def default_translit_table() -> TranslitTable:
    return TranslitTable()


def romanise(text: str, table: TranslitTable | None = None) -> str:
    """Deterministic table-driven transliteration to lowercase ASCII.

    ASCII input passes through unchanged apart from lowercasing, so the
    function is idempotent. Hangul syllables are decomposed and romanised
    with positional Jamo readings. Characters absent from the table are
    dropped.
    """
    if table is None:
        table = default_translit_table()
    out: list[str] = []
    for ch in unicodedata.normalize("NFC", text).casefold():
        if ch.isascii():
            out.append(ch)
            continue
        if is_hangul_syllable(ch):
            jamo = decompose_hangul(ch)
            out.append(table.lookup(jamo[0], "lead") or "")
            out.append(table.lookup(jamo[1], "vowel") or "")
            if len(jamo) == 3:
                out.append(table.lookup(jamo[2], "tail") or "")
            continue
        mapped = table.lookup(ch)
        if mapped is not None:
            out.append(mapped)
    return "".join(out)


# ---------------------------------------------------------------------------
# Preprocessing into the Student's token stream.

@dataclass(frozen=True)
class TokenSeq:
    """Ordered (token, script) pairs produced by :func:`preprocess`."""

    tokens: tuple[tuple[str, ScriptId], ...]
    source: str = ""

    def __len__(self) -> int:
        return len(self.tokens)

    def strings(self) -> tuple[str, ...]:
        return tuple(t for t, _ in self.tokens)

    def scripts(self) -> tuple[ScriptId, ...]:
        return tuple(s for _, s in self.tokens)


def preprocess(text: str, table: TranslitTable | None = None) -> TokenSeq:
    """Normalise and tokenise a toponym for the character encoder.

    NFC normalisation, case folding for bicameral scripts, per-character
    transliteration tokens for CJK/Kana, Jamo decomposition for Hangul
    syllables; all remaining characters become single-character tokens
    tagged with their script. Never fails on odd input: characters without
    a transliteration stay as raw UNK-eligible tokens.
    """
    if not text:
        raise ValueError("empty toponym")
    if table is None:
        table = default_translit_table()
    tokens: list[tuple[str, ScriptId]] = []
    for ch in unicodedata.normalize("NFC", text):
        sid = char_script(ch)
        if sid in ROMANISED_SCRIPTS:
            mapped = table.lookup(ch)
            tokens.append((mapped if mapped else ch, sid))
            continue
        if sid is ScriptId.HANGUL and is_hangul_syllable(ch):
            tokens.extend((j, ScriptId.HANGUL) for j in decompose_hangul(ch))
            continue
        if sid in CASED_SCRIPTS:
            for folded in ch.casefold():
                tokens.append((folded, char_script(folded)))
            continue
        tokens.append((ch, sid))
    return TokenSeq(tokens=tuple(tokens), source=text)
