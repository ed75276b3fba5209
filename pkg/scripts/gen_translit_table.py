#!/usr/bin/env python3
"""Regenerate src/phonotope/data/translit_v1.tsv.

The table maps single code points to lowercase ASCII strings. Latin
diacritics are derived mechanically from NFKD decompositions; all other
scripts use hand-maintained letter tables below. Jamo entries carry a
positional context (lead/vowel/tail) so that Hangul syllables romanise
with position-dependent readings (e.g. the silent lead ieung vs the
final -ng).

Run from the repository root:
    python3 scripts/gen_translit_table.py
"""

from __future__ import annotations

import sys
import unicodedata
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "phonotope" / "data" / "translit_v1.tsv"

VERSION = "1"

# Latin letters that NFKD cannot reduce to ASCII.
LATIN_SPECIAL = {
    "æ": "ae", "ø": "o", "œ": "oe", "ð": "d", "þ": "th", "đ": "d",
    "ħ": "h", "ı": "i", "ĸ": "k", "ŋ": "ng", "ł": "l", "ſ": "s",
    "ƒ": "f", "ȡ": "d", "ȴ": "l", "ȵ": "n", "ȶ": "t", "ə": "e",
    "ɐ": "a", "ɑ": "a", "ɓ": "b", "ɔ": "o", "ɖ": "d", "ɗ": "d",
    "ƀ": "b", "ƃ": "b", "ƅ": "b", "ƈ": "c", "ƌ": "d", "ƙ": "k",
    "ƚ": "l", "ơ": "o", "ƥ": "p", "ƫ": "t", "ƭ": "t", "ư": "u",
    "ƴ": "y", "ƶ": "z", "ǀ": "", "ǁ": "", "ǂ": "", "ǃ": "",
    "ȝ": "g", "ȥ": "z", "ɀ": "z",
}

CYRILLIC = {
    "а": "a", "б": "b", "в": "v", "г": "g", "д": "d", "е": "e",
    "ж": "zh", "з": "z", "и": "i", "й": "j", "к": "k", "л": "l",
    "м": "m", "н": "n", "о": "o", "п": "p", "р": "r", "с": "s",
    "т": "t", "у": "u", "ф": "f", "х": "h", "ц": "c", "ч": "ch",
    "ш": "sh", "щ": "shch", "ъ": "", "ы": "y", "ь": "", "э": "e",
    "ю": "yu", "я": "ya", "ё": "e",
    # Ukrainian / Belarusian / Serbian / Macedonian extras
    "і": "i", "ї": "yi", "є": "ye", "ґ": "g", "ў": "u",
    "ј": "j", "љ": "lj", "њ": "nj", "џ": "dz", "ћ": "c", "ђ": "dj",
    "ѓ": "g", "ќ": "k", "ѕ": "dz",
    # Central Asian / Caucasus extensions
    "ғ": "g", "қ": "q", "ң": "ng", "ү": "u", "ұ": "u", "һ": "h",
    "ә": "a", "ө": "o", "ҝ": "k", "ҹ": "j", "ӯ": "u", "ӣ": "i",
}

GREEK = {
    "α": "a", "β": "v", "γ": "g", "δ": "d", "ε": "e", "ζ": "z",
    "η": "i", "θ": "th", "ι": "i", "κ": "k", "λ": "l", "μ": "m",
    "ν": "n", "ξ": "x", "ο": "o", "π": "p", "ρ": "r", "σ": "s",
    "ς": "s", "τ": "t", "υ": "y", "φ": "f", "χ": "ch", "ψ": "ps",
    "ω": "o",
    "ά": "a", "έ": "e", "ή": "i", "ί": "i", "ό": "o", "ύ": "y",
    "ώ": "o", "ϊ": "i", "ϋ": "y", "ΐ": "i", "ΰ": "y",
}

HEBREW = {
    "א": "", "ב": "b", "ג": "g", "ד": "d", "ה": "h", "ו": "w",
    "ז": "z", "ח": "h", "ט": "t", "י": "y", "כ": "k", "ך": "k",
    "ל": "l", "מ": "m", "ם": "m", "נ": "n", "ן": "n", "ס": "s",
    "ע": "", "פ": "p", "ף": "p", "צ": "ts", "ץ": "ts", "ק": "q",
    "ר": "r", "ש": "sh", "ת": "t",
}

ARABIC = {
    "ا": "a", "ب": "b", "ت": "t", "ث": "th", "ج": "j", "ح": "h",
    "خ": "kh", "د": "d", "ذ": "dh", "ر": "r", "ز": "z", "س": "s",
    "ش": "sh", "ص": "s", "ض": "d", "ط": "t", "ظ": "z", "ع": "",
    "غ": "gh", "ف": "f", "ق": "q", "ك": "k", "ل": "l", "م": "m",
    "ن": "n", "ه": "h", "و": "w", "ي": "y", "ء": "", "آ": "a",
    "أ": "a", "ؤ": "w", "إ": "i", "ئ": "y", "ى": "a", "ة": "h",
    "پ": "p", "چ": "ch", "ژ": "zh", "گ": "g", "ک": "k", "ی": "y",
}

GEORGIAN = {
    "ა": "a", "ბ": "b", "გ": "g", "დ": "d", "ე": "e", "ვ": "v",
    "ზ": "z", "თ": "t", "ი": "i", "კ": "k", "ლ": "l", "მ": "m",
    "ნ": "n", "ო": "o", "პ": "p", "ჟ": "zh", "რ": "r", "ს": "s",
    "ტ": "t", "უ": "u", "ფ": "p", "ქ": "k", "ღ": "gh", "ყ": "q",
    "შ": "sh", "ჩ": "ch", "ც": "ts", "ძ": "dz", "წ": "ts",
    "ჭ": "ch", "ხ": "kh", "ჯ": "j", "ჰ": "h",
}

ARMENIAN = {
    "ա": "a", "բ": "b", "գ": "g", "դ": "d", "ե": "e", "զ": "z",
    "է": "e", "ը": "e", "թ": "t", "ժ": "zh", "ի": "i", "լ": "l",
    "խ": "kh", "ծ": "ts", "կ": "k", "հ": "h", "ձ": "dz", "ղ": "gh",
    "ճ": "ch", "մ": "m", "յ": "y", "ն": "n", "շ": "sh", "ո": "o",
    "չ": "ch", "պ": "p", "ջ": "j", "ռ": "r", "ս": "s", "վ": "v",
    "տ": "t", "ր": "r", "ց": "ts", "ւ": "v", "փ": "p", "ք": "k",
    "օ": "o", "ֆ": "f", "և": "ev",
}

THAI = {
    "ก": "k", "ข": "kh", "ค": "kh", "ง": "ng", "จ": "ch", "ฉ": "ch",
    "ช": "ch", "ซ": "s", "ญ": "y", "ด": "d", "ต": "t", "ถ": "th",
    "ท": "th", "ธ": "th", "น": "n", "บ": "b", "ป": "p", "ผ": "ph",
    "ฝ": "f", "พ": "ph", "ฟ": "f", "ภ": "ph", "ม": "m", "ย": "y",
    "ร": "r", "ล": "l", "ว": "w", "ศ": "s", "ษ": "s", "ส": "s",
    "ห": "h", "อ": "o", "ฮ": "h", "ะ": "a", "า": "a", "ิ": "i",
    "ี": "i", "ึ": "ue", "ื": "ue", "ุ": "u", "ู": "u", "เ": "e",
    "แ": "ae", "โ": "o", "ใ": "ai", "ไ": "ai", "ำ": "am",
}

DEVANAGARI = {
    "अ": "a", "आ": "a", "इ": "i", "ई": "i", "उ": "u", "ऊ": "u",
    "ए": "e", "ऐ": "ai", "ओ": "o", "औ": "au", "क": "k", "ख": "kh",
    "ग": "g", "घ": "gh", "च": "ch", "छ": "chh", "ज": "j", "झ": "jh",
    "ट": "t", "ठ": "th", "ड": "d", "ढ": "dh", "ण": "n", "त": "t",
    "थ": "th", "द": "d", "ध": "dh", "न": "n", "प": "p", "फ": "ph",
    "ब": "b", "भ": "bh", "म": "m", "य": "y", "र": "r", "ल": "l",
    "व": "v", "श": "sh", "ष": "sh", "स": "s", "ह": "h", "ा": "a",
    "ि": "i", "ी": "i", "ु": "u", "ू": "u", "े": "e", "ै": "ai",
    "ो": "o", "ौ": "au", "्": "", "ं": "n", "ः": "h", "ऋ": "ri",
    "ृ": "ri", "ँ": "n", "़": "",
}

# Positional Jamo romanisation (Revised-Romanisation-like). The lead ieung
# is silent; as a tail it reads -ng.
JAMO_LEAD = {
    "ㄱ": "g", "ㄲ": "kk", "ㄴ": "n", "ㄷ": "d", "ㄸ": "tt", "ㄹ": "r",
    "ㅁ": "m", "ㅂ": "b", "ㅃ": "pp", "ㅅ": "s", "ㅆ": "ss", "ㅇ": "",
    "ㅈ": "j", "ㅉ": "jj", "ㅊ": "ch", "ㅋ": "k", "ㅌ": "t", "ㅍ": "p",
    "ㅎ": "h",
}
JAMO_VOWEL = {
    "ㅏ": "a", "ㅐ": "ae", "ㅑ": "ya", "ㅒ": "yae", "ㅓ": "eo",
    "ㅔ": "e", "ㅕ": "yeo", "ㅖ": "ye", "ㅗ": "o", "ㅘ": "wa",
    "ㅙ": "wae", "ㅚ": "oe", "ㅛ": "yo", "ㅜ": "u", "ㅝ": "wo",
    "ㅞ": "we", "ㅟ": "wi", "ㅠ": "yu", "ㅡ": "eu", "ㅢ": "ui",
    "ㅣ": "i",
}
JAMO_TAIL = {
    "ㄱ": "k", "ㄲ": "k", "ㄳ": "k", "ㄴ": "n", "ㄵ": "n", "ㄶ": "n",
    "ㄷ": "t", "ㄹ": "l", "ㄺ": "k", "ㄻ": "m", "ㄼ": "l", "ㄽ": "l",
    "ㄾ": "l", "ㄿ": "p", "ㅀ": "l", "ㅁ": "m", "ㅂ": "p", "ㅄ": "p",
    "ㅅ": "t", "ㅆ": "t", "ㅇ": "ng", "ㅈ": "t", "ㅊ": "t", "ㅋ": "k",
    "ㅌ": "t", "ㅍ": "p", "ㅎ": "t",
}

HIRAGANA = {
    "あ": "a", "い": "i", "う": "u", "え": "e", "お": "o",
    "か": "ka", "き": "ki", "く": "ku", "け": "ke", "こ": "ko",
    "が": "ga", "ぎ": "gi", "ぐ": "gu", "げ": "ge", "ご": "go",
    "さ": "sa", "し": "shi", "す": "su", "せ": "se", "そ": "so",
    "ざ": "za", "じ": "ji", "ず": "zu", "ぜ": "ze", "ぞ": "zo",
    "た": "ta", "ち": "chi", "つ": "tsu", "て": "te", "と": "to",
    "だ": "da", "ぢ": "ji", "づ": "zu", "で": "de", "ど": "do",
    "な": "na", "に": "ni", "ぬ": "nu", "ね": "ne", "の": "no",
    "は": "ha", "ひ": "hi", "ふ": "fu", "へ": "he", "ほ": "ho",
    "ば": "ba", "び": "bi", "ぶ": "bu", "べ": "be", "ぼ": "bo",
    "ぱ": "pa", "ぴ": "pi", "ぷ": "pu", "ぺ": "pe", "ぽ": "po",
    "ま": "ma", "み": "mi", "む": "mu", "め": "me", "も": "mo",
    "や": "ya", "ゆ": "yu", "よ": "yo",
    "ら": "ra", "り": "ri", "る": "ru", "れ": "re", "ろ": "ro",
    "わ": "wa", "を": "o", "ん": "n", "っ": "", "ゃ": "ya",
    "ゅ": "yu", "ょ": "yo", "ー": "",
}

CJK_MINI = {
    "北": "bei", "京": "jing", "東": "dong", "东": "dong", "西": "xi",
    "南": "nan", "中": "zhong", "国": "guo", "國": "guo", "日": "ri",
    "本": "ben", "上": "shang", "海": "hai", "台": "tai", "湾": "wan",
    "灣": "wan", "香": "xiang", "港": "gang", "州": "zhou", "广": "guang",
    "廣": "guang", "山": "shan", "川": "chuan", "河": "he", "湖": "hu",
    "江": "jiang", "城": "cheng", "市": "shi", "大": "da", "小": "xiao",
    "新": "xin", "安": "an", "宁": "ning", "寧": "ning", "天": "tian",
    "津": "jin", "重": "chong", "庆": "qing", "慶": "qing", "成": "cheng",
    "都": "du", "武": "wu", "汉": "han", "漢": "han", "深": "shen",
    "圳": "zhen", "杭": "hang", "苏": "su", "蘇": "su", "福": "fu",
    "建": "jian", "平": "ping", "阳": "yang", "陽": "yang", "长": "chang",
    "長": "chang", "春": "chun", "沈": "shen", "京都": "kyoto",
}


def nfkd_latin() -> dict[str, str]:
    """Latin letters with diacritics reduced via NFKD strip."""
    out: dict[str, str] = {}
    ranges = [(0x00C0, 0x024F), (0x1E00, 0x1EFF)]
    for lo, hi in ranges:
        for cp in range(lo, hi + 1):
            ch = chr(cp)
            if unicodedata.category(ch) not in ("Lu", "Ll"):
                continue
            folded = ch.casefold()
            stripped = "".join(
                c for c in unicodedata.normalize("NFKD", folded)
                if not unicodedata.combining(c)
            )
            if stripped and stripped.isascii() and stripped.isalpha():
                out[folded] = stripped.lower()
    return out


def main() -> int:
    entries: list[tuple[int, str, str]] = []

    def add(table: dict[str, str], context: str = "any") -> None:
        for ch, ascii_out in table.items():
            if len(ch) != 1 or ch.isascii():
                continue
            entries.append((ord(ch), ascii_out, context))

    add(nfkd_latin())
    add(LATIN_SPECIAL)
    add(CYRILLIC)
    add(GREEK)
    add(HEBREW)
    add(ARABIC)
    add(GEORGIAN)
    add(ARMENIAN)
    add(THAI)
    add(DEVANAGARI)
    add(HIRAGANA)
    # Katakana mirrors Hiragana at a fixed offset for the basic syllabary.
    kata = {}
    for ch, ascii_out in HIRAGANA.items():
        cp = ord(ch)
        if 0x3041 <= cp <= 0x3096:
            kata[chr(cp + 0x60)] = ascii_out
    add(kata)
    add(CJK_MINI)
    add(JAMO_LEAD, "lead")
    add(JAMO_VOWEL, "vowel")
    add(JAMO_TAIL, "tail")
    # Standalone compatibility Jamo fall back to lead/vowel readings.
    add({ch: v for ch, v in JAMO_LEAD.items() if v})
    add(JAMO_VOWEL)
    add({ch: v for ch, v in JAMO_TAIL.items() if ch not in JAMO_LEAD and ch not in JAMO_VOWEL})

    seen: dict[tuple[int, str], str] = {}
    for cp, ascii_out, context in entries:
        key = (cp, context)
        if key not in seen:
            seen[key] = ascii_out

    OUT.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT, "w", encoding="utf-8") as fh:
        fh.write("# phonotope transliteration table\n")
        fh.write(f"# version={VERSION}\n")
        fh.write("# format: U+XXXX <TAB> ascii [<TAB> lead|vowel|tail]\n")
        for (cp, context), ascii_out in sorted(seen.items()):
            if context == "any":
                fh.write(f"U+{cp:04X}\t{ascii_out}\n")
            else:
                fh.write(f"U+{cp:04X}\t{ascii_out}\t{context}\n")
    print(f"wrote {OUT} ({len(seen)} entries)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
