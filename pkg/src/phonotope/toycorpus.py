"""Deterministic toy gazetteer for tests and demos.

Synthetic place names are drawn from a small phoneme inventory and
rendered into six scripts through per-script transliteration conventions
that mimic real orthographic loss: Hebrew drops most vowels (matres
lectionis for i/o/u only), Greek renders voiced stops as digraphs and u as
a digraph vowel, Korean merges l/r and b/v and resyllabifies, Georgian
merges f into aspirated p. Cyrillic is near-lossless. The mismatch between
these conventions and the generic romanisation table is what gives a
trained character model headroom over romanised edit distance, which is
exactly the regime the production system targets.

Everything derives from one seed: corpus generation is a single
random.Random stream, so identical configs yield byte-identical output.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import ToponymStore
from .scriptkit import ScriptId, compose_hangul

ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"]
VOWELS = ["a", "e", "i", "o", "u"]
CODAS = ["n", "r", "l", "s", "t", "k", "m"]

CYRILLIC_MAP = {
    "b": "б", "d": "д", "f": "ф", "g": "г", "k": "к", "l": "л",
    "m": "м", "n": "н", "p": "п", "r": "р", "s": "с", "t": "т",
    "v": "в", "z": "з", "a": "а", "e": "е", "i": "и", "o": "о", "u": "у",
}

GREEK_MAP = {
    "b": "μπ", "d": "ντ", "f": "φ", "g": "γκ", "k": "κ", "l": "λ",
    "m": "μ", "n": "ν", "p": "π", "r": "ρ", "s": "σ", "t": "τ",
    "v": "β", "z": "ζ", "a": "α", "e": "ε", "i": "ι", "o": "ο", "u": "ου",
}

GEORGIAN_MAP = {
    "b": "ბ", "d": "დ", "f": "ფ", "g": "გ", "k": "კ", "l": "ლ",
    "m": "მ", "n": "ნ", "p": "ფ", "r": "რ", "s": "ს", "t": "ტ",
    "v": "ვ", "z": "ზ", "a": "ა", "e": "ე", "i": "ი", "o": "ო", "u": "უ",
}

HEBREW_CONS = {
    "b": "ב", "v": "ב", "f": "פ", "p": "פ", "d": "ד", "g": "ג",
    "k": "כ", "l": "ל", "m": "מ", "n": "נ", "r": "ר", "s": "ס",
    "t": "ת", "z": "ז",
}
HEBREW_FINAL = {"כ": "ך", "מ": "ם", "נ": "ן", "פ": "ף"}
HEBREW_VOWEL = {"a": "", "e": "", "i": "י", "o": "ו", "u": "ו"}

KOREAN_LEAD = {
    "b": "ㅂ", "v": "ㅂ", "p": "ㅍ", "f": "ㅍ", "d": "ㄷ", "t": "ㅌ",
    "g": "ㄱ", "k": "ㅋ", "l": "ㄹ", "r": "ㄹ", "m": "ㅁ", "n": "ㄴ",
    "s": "ㅅ", "z": "ㅈ",
}
KOREAN_VOWEL = {"a": "ㅏ", "e": "ㅔ", "i": "ㅣ", "o": "ㅗ", "u": "ㅜ"}
KOREAN_TAIL = {
    "n": "ㄴ", "m": "ㅁ", "l": "ㄹ", "r": "ㄹ", "k": "ㄱ", "g": "ㄱ",
    "t": "ㅅ", "s": "ㅅ", "b": "ㅂ", "p": "ㅂ",
}

SCRIPT_LANGS = [
    ("cyr", "ru"), ("ell", "el"), ("heb", "he"), ("kat", "ka"), ("kor", "ko"),
]


@dataclass
class ToyCorpusConfig:
    n_places: int = 10_000
    seed: int = 2025
    holdout: int = 500           # places excluded from pair generation
    min_scripts: int = 2
    max_scripts: int = 4
    latin_variant_rate: float = 0.25
    twin_rate: float = 0.03
    unknown_lang_rate: float = 0.08
    homonym_rate: float = 0.005


def make_phonemes(rng: random.Random) -> list[str]:
    """A pronounceable 2-3 syllable skeleton as a phoneme list.

    The inventory is deliberately small so that consonant skeletons
    collide across names; that is what separates a phonetics-aware
    matcher from romanised edit distance in the retrieval eval.
    """
    phonemes: list[str] = []
    for syllable in range(rng.randint(2, 3)):
        phonemes.append(rng.choice(ONSETS))
        phonemes.append(rng.choice(VOWELS))
        if rng.random() < 0.25:
            phonemes.append(rng.choice(CODAS))
    return phonemes


def to_latin(phonemes: list[str]) -> str:
    name = "".join(phonemes)
    return name[0].upper() + name[1:]


def to_cyrillic(phonemes: list[str]) -> str:
    return "".join(CYRILLIC_MAP[p] for p in phonemes).capitalize()


def to_greek(phonemes: list[str]) -> str:
    out = "".join(GREEK_MAP[p] for p in phonemes)
    if out.endswith("σ"):
        out = out[:-1] + "ς"
    return out


def to_georgian(phonemes: list[str]) -> str:
    return "".join(GEORGIAN_MAP[p] for p in phonemes)


def to_hebrew(phonemes: list[str]) -> str:
    out: list[str] = []
    for i, p in enumerate(phonemes):
        if p in HEBREW_CONS:
            out.append(HEBREW_CONS[p])
        else:
            if i == 0:
                out.append("א")  # word-initial vowel carrier
            out.append(HEBREW_VOWEL[p])
    if out and out[-1] in HEBREW_FINAL:
        out[-1] = HEBREW_FINAL[out[-1]]
    return "".join(out)


def to_korean(phonemes: list[str]) -> str:
    """Resyllabify into Hangul blocks with epenthetic ㅡ for clusters."""
    syllables: list[str] = []
    i = 0
    n = len(phonemes)
    while i < n:
        p = phonemes[i]
        if p in KOREAN_VOWEL:
            lead, vowel = "ㅇ", KOREAN_VOWEL[p]
            i += 1
        else:
            lead = KOREAN_LEAD[p]
            i += 1
            if i < n and phonemes[i] in KOREAN_VOWEL:
                vowel = KOREAN_VOWEL[phonemes[i]]
                i += 1
            else:
                vowel = "ㅡ"  # epenthetic vowel inside a cluster
        tail = None
        if i < n and phonemes[i] in KOREAN_TAIL:
            nxt = phonemes[i + 1] if i + 1 < n else None
            if nxt is None or nxt not in KOREAN_VOWEL:
                tail = KOREAN_TAIL[phonemes[i]]
                i += 1
        syllables.append(compose_hangul(lead, vowel, tail))
    return "".join(syllables)


RENDERERS = {
    "cyr": to_cyrillic,
    "ell": to_greek,
    "heb": to_hebrew,
    "kat": to_georgian,
    "kor": to_korean,
}


def mutate_latin(phonemes: list[str], rng: random.Random) -> str:
    """A same-script exonym-like variant: one vowel shifted."""
    variant = list(phonemes)
    vowel_at = [i for i, p in enumerate(variant) if p in VOWELS]
    pos = rng.choice(vowel_at)
    choices = [v for v in VOWELS if v != variant[pos]]
    variant[pos] = rng.choice(choices)
    return to_latin(variant)


@dataclass
class ToyCorpus:
    places_path: Path
    holdout_path: Path
    n_places: int
    n_toponyms: int
    holdout_place_ids: list[int]


def generate(cfg: ToyCorpusConfig, out_dir: str | Path) -> ToyCorpus:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(cfg.seed)
    places_path = out_dir / "places.jsonl"
    holdout_path = out_dir / "holdout_places.txt"
    n_toponyms = 0
    seen_bases: list[list[str]] = []
    # Distinct places must not share any rendered surface form: scripts
    # that drop vowels (Hebrew) or merge consonants (Korean) would
    # otherwise alias distinct bases into literally identical strings,
    # which no matcher can tell apart. Deliberate homonyms are separate.
    seen_forms: set[str] = set()

    def renderings(phonemes: list[str]) -> list[str]:
        return [to_latin(phonemes)] + [r(phonemes) for r in RENDERERS.values()]

    with open(places_path, "w", encoding="utf-8") as fh:
        fh.write(f"# phonotope-toy-corpus v1 seed={cfg.seed} "
                 f"places={cfg.n_places}\n")
        for place_id in range(cfg.n_places):
            if seen_bases and rng.random() < cfg.homonym_rate:
                phonemes = rng.choice(seen_bases)
            else:
                for _ in range(50):
                    phonemes = make_phonemes(rng)
                    forms = renderings(phonemes)
                    if not any(f in seen_forms for f in forms):
                        break
                seen_forms.update(renderings(phonemes))
                seen_bases.append(phonemes)
            toponyms = [{"name": to_latin(phonemes), "lang": "eo"}]
            n_scripts = rng.randint(cfg.min_scripts, cfg.max_scripts)
            scripts = rng.sample(SCRIPT_LANGS, n_scripts)
            for key, lang in scripts:
                name = RENDERERS[key](phonemes)
                if rng.random() < cfg.unknown_lang_rate:
                    lang = None
                toponyms.append({"name": name, "lang": lang})
            if rng.random() < cfg.latin_variant_rate:
                toponyms.append({"name": mutate_latin(phonemes, rng),
                                 "lang": "de"})
            if rng.random() < cfg.twin_rate:
                toponyms.append({"name": to_latin(phonemes), "lang": "fr"})
            namespace = rng.choice(["gn", "wd", "tgn"])
            fh.write(json.dumps({"place_id": place_id,
                                 "namespace": namespace,
                                 "toponyms": toponyms},
                                ensure_ascii=False, sort_keys=True) + "\n")
            n_toponyms += len(toponyms)
    holdout_ids = sorted(rng.sample(range(cfg.n_places), cfg.holdout))
    holdout_path.write_text(
        "\n".join(str(i) for i in holdout_ids) + "\n", encoding="utf-8")
    return ToyCorpus(places_path, holdout_path, cfg.n_places, n_toponyms,
                     holdout_ids)


def load_holdout(path: str | Path) -> frozenset[int]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(int(line) for line in lines if line.strip())


def desk_pipeline_config(work: str | Path, corpus: ToyCorpus):
    """Desk-scale pipeline preset for the bundled toy corpus.

    Epoch counts are sized for a CPU-only box: the teacher converges well
    inside 10 epochs at this scale, distillation is stopped once alignment
    clears the mid-0.98s (leaving the hard-negative phase real work, which
    mirrors the full-scale regime where alignment plateaus near 0.97), and
    fine-tuning gets the longest schedule since it carries retrieval.
    """
    from .config import PipelineConfig, QuotaTable, TrainConfig
    work = Path(work)
    return PipelineConfig(
        workdir=str(work),
        corpus=str(corpus.places_path),
        vocab=str(work / "vocab.tsv"),
        langs=str(work / "langs.tsv"),
        toponyms=str(work / "toponyms.tsv"),
        pairs=str(work / "pairs.tsv"),
        triplets_random=str(work / "triplets_random.tsv"),
        triplets_hard=str(work / "triplets_hard.tsv"),
        checkpoint_dir=str(work / "ckpt"),
        embeddings=str(work / "embeddings.bin"),
        index=str(work / "index.bin"),
        reports=str(work / "reports"),
        exclude_places=str(corpus.holdout_path),
        quotas=QuotaTable(n_per_pair=1500),
        phase1=TrainConfig.phase1(epochs=10, seed=7),
        phase2=TrainConfig.phase2(epochs=3, seed=7),
        phase3=TrainConfig.phase3(epochs=16, seed=7),
    )


def holdout_testset(store: ToponymStore, holdout_place_ids,
                    max_queries: int = 500, seed: int = 11):
    """Cross-script retrieval eval over held-out places.

    One query per place: a non-Latin variant queries against the pool of
    all held-out Latin names; the truth is the co-located Latin toponym.
    """
    from .evalkit import Testset
    rng = random.Random(seed)
    queries = []
    candidates = []
    for place_id in sorted(holdout_place_ids):
        ids = store.place_map.get(place_id)
        if not ids:
            continue
        records = [store[i] for i in ids]
        latin = [r for r in records if r.script is ScriptId.LATIN]
        other = [r for r in records if r.script is not ScriptId.LATIN]
        if not latin or not other:
            continue
        truth = latin[0]
        query = rng.choice(other)
        candidates.append((truth.id, truth.name))
        queries.append((query.name, query.script, truth.id))
    if len(queries) > max_queries:
        keep = sorted(rng.sample(range(len(queries)), max_queries))
        queries = [queries[i] for i in keep]
        keep_truths = {t for _, _, t in queries}
        candidates = [c for c in candidates if c[0] in keep_truths]
    return Testset("toy-holdout", queries, candidates)
