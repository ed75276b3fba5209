"""Gazetteer ingestion and training-pair/triplet generation.

Positive pairs come from co-located toponyms (same place record), filtered
by normalised Levenshtein similarity on romanised forms so that false
cognates (Germany/Deutschland) never become positives. Script-pair quotas,
global deduplication and acceptance sampling keep the emitted stream
balanced. Hard negatives for the discriminative fine-tuning phase share a
2-character romanised prefix and script with the anchor and are screened
against the co-location adjacency set.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, TextIO

from .config import QuotaTable, artifact_header
from .scriptkit import ScriptId, detect_script, romanise

_LANG_SCRIPTS_FILE = Path(__file__).parent / "data" / "lang_scripts.tsv"

NAMESPACES = ("gn", "wd", "tgn", "other")


@dataclass(frozen=True)
class ToponymRecord:
    id: int
    place_id: int
    name: str
    lang: str | None
    script: ScriptId
    namespace: str


@dataclass(frozen=True)
class PairRecord:
    anchor_id: int
    positive_id: int
    similarity: float
    script_a: ScriptId
    script_b: ScriptId


@dataclass(frozen=True)
class Triplet:
    anchor_id: int
    positive_id: int
    negative_id: int
    kind: str  # "random" | "hard"


class ToponymStore:
    """Toponym records addressable by id, plus the place -> ids map."""

    def __init__(self) -> None:
        self._records: list[ToponymRecord] = []
        self.place_map: dict[int, list[int]] = {}

    def add(self, place_id: int, name: str, lang: str | None,
            namespace: str) -> ToponymRecord:
        rec = ToponymRecord(
            id=len(self._records),
            place_id=place_id,
            name=name,
            lang=lang,
            script=detect_script(name),
            namespace=namespace,
        )
        self._records.append(rec)
        self.place_map.setdefault(place_id, []).append(rec.id)
        return rec

    def __len__(self) -> int:
        return len(self._records)

    def __getitem__(self, ident: int) -> ToponymRecord:
        return self._records[ident]

    def __iter__(self) -> Iterator[ToponymRecord]:
        return iter(self._records)

    def ids(self) -> range:
        return range(len(self._records))

    def save(self, path: str | Path, config_hash: str = "", seed: int = 0) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(artifact_header("toponyms", config_hash, seed) + "\n")
            for rec in self._records:
                lang = rec.lang if rec.lang is not None else ""
                fh.write(f"{rec.id}\t{rec.place_id}\t{rec.namespace}\t"
                         f"{lang}\t{rec.script.name}\t{rec.name}\n")

    @classmethod
    def load(cls, path: str | Path) -> "ToponymStore":
        store = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                ident, place_id, ns, lang, script, name = line.split("\t")
                rec = ToponymRecord(
                    id=int(ident), place_id=int(place_id), name=name,
                    lang=lang or None, script=ScriptId[script], namespace=ns)
                if rec.id != len(store._records):
                    raise ValueError(f"non-dense toponym ids in {path}")
                store._records.append(rec)
                store.place_map.setdefault(rec.place_id, []).append(rec.id)
        return store


def load_lang_scripts(path: str | Path = _LANG_SCRIPTS_FILE
                      ) -> dict[str, frozenset[ScriptId]]:
    table: dict[str, frozenset[ScriptId]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            lang, scripts = line.split("\t")
            table[lang] = frozenset(ScriptId[s] for s in scripts.split(","))
    return table


@dataclass
class FilterReport:
    kept: int = 0
    filtered_preromanised: int = 0
    malformed_lines: int = 0
    by_lang_script: dict[tuple[str, str], int] = field(default_factory=dict)

    def note_filtered(self, lang: str, script: ScriptId) -> None:
        self.filtered_preromanised += 1
        key = (lang, script.name)
        self.by_lang_script[key] = self.by_lang_script.get(key, 0) + 1


def ingest(lines: Iterable[str],
           lang_scripts: dict[str, frozenset[ScriptId]] | None = None,
           ) -> tuple[ToponymStore, FilterReport]:
    """Read place documents (JSON lines) into a toponym store.

    A toponym is filtered as pre-romanised when its language code expects a
    non-Latin script but the name is written in Latin (e.g. Pinyin under a
    ``zh`` tag). Malformed lines are skipped and counted; a document that
    parses but violates the schema aborts the run.
    """
    if lang_scripts is None:
        lang_scripts = load_lang_scripts()
    store = ToponymStore()
    report = FilterReport()
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError:
            report.malformed_lines += 1
            continue
        try:
            place_id = int(doc["place_id"])
            namespace = doc.get("namespace", "other")
            toponyms = doc["toponyms"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"place document schema violation: {exc}") from exc
        if namespace not in NAMESPACES:
            raise ValueError(f"unknown namespace: {namespace!r}")
        for entry in toponyms:
            name = entry.get("name")
            if not name or not isinstance(name, str):
                report.malformed_lines += 1
                continue
            lang = entry.get("lang") or None
            script = detect_script(name)
            expected = lang_scripts.get(lang) if lang else None
            if (expected is not None and script is ScriptId.LATIN
                    and ScriptId.LATIN not in expected):
                report.note_filtered(lang, script)
                continue
            store.add(place_id, name, lang, namespace)
            report.kept += 1
    return store, report


# ---------------------------------------------------------------------------
# String similarity

def levenshtein(a: str, b: str) -> int:
    """Two-row DP edit distance (insert/delete/substitute, unit costs)."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1,
                           cur[j - 1] + 1,
                           prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def norm_lev_sim(a: str, b: str) -> float:
    """1 - levenshtein/max(len); 1.0 when both strings are empty."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


# ---------------------------------------------------------------------------
# Pair generation

CROSS_SCRIPT_THRESHOLD = 0.35
SAME_SCRIPT_THRESHOLD = 0.60


def _script_pair(a: ScriptId, b: ScriptId) -> tuple[ScriptId, ScriptId]:
    return (a, b) if a <= b else (b, a)


@dataclass
class PairGenStats:
    candidates: int = 0
    emitted: int = 0
    rejected_threshold: int = 0
    rejected_duplicate: int = 0
    rejected_quota: int = 0
    rejected_sampling: int = 0
    # acceptance bookkeeping inside the low-budget regime, for auditing
    # the cross:same weighting
    low_offered_cross: int = 0
    low_accepted_cross: int = 0
    low_offered_same: int = 0
    low_accepted_same: int = 0


def gen_pairs(store: ToponymStore,
              quotas: QuotaTable,
              seed: int,
              exclude_places: frozenset[int] | set[int] = frozenset(),
              ) -> tuple[list[PairRecord], PairGenStats]:
    """Emit filtered positive pairs from co-located toponyms.

    Deterministic scan order: ascending place_id, toponyms by id. Per
    candidate the gates run in order: similarity threshold (orthographic
    twins bypass it), global dedup on unordered (name, lang) tuples,
    script-pair quota, acceptance sampling.
    """
    rng = random.Random(seed)
    stats = PairGenStats()
    budgets: dict[tuple[ScriptId, ScriptId], int] = {}
    seen: set[tuple[tuple[str, str], tuple[str, str]]] = set()
    rom_cache: dict[int, str] = {}
    pairs: list[PairRecord] = []
    low_cut = quotas.low_budget_frac * quotas.n_per_pair

    def rom(rec: ToponymRecord) -> str:
        hit = rom_cache.get(rec.id)
        if hit is None:
            hit = romanise(rec.name)
            rom_cache[rec.id] = hit
        return hit

    for place_id in sorted(store.place_map):
        if place_id in exclude_places:
            continue
        ids = sorted(store.place_map[place_id])
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                a, b = store[ids[i]], store[ids[j]]
                stats.candidates += 1
                same_script = a.script == b.script
                cross_language = (a.lang or "") != (b.lang or "")
                twin = a.name == b.name and cross_language
                if twin:
                    sim = 1.0
                else:
                    sim = norm_lev_sim(rom(a), rom(b))
                    threshold = (SAME_SCRIPT_THRESHOLD if same_script
                                 else CROSS_SCRIPT_THRESHOLD)
                    if sim < threshold:
                        stats.rejected_threshold += 1
                        continue
                key = tuple(sorted(((a.name.casefold(), a.lang or ""),
                                    (b.name.casefold(), b.lang or ""))))
                if key in seen:
                    stats.rejected_duplicate += 1
                    continue
                spair = _script_pair(a.script, b.script)
                remaining = budgets.setdefault(spair, quotas.n_per_pair)
                if remaining <= 0:
                    stats.rejected_quota += 1
                    continue
                low_budget = remaining < low_cut
                p = quotas.acceptance_prob(not same_script, cross_language,
                                           low_budget)
                if low_budget:
                    if same_script:
                        stats.low_offered_same += 1
                    else:
                        stats.low_offered_cross += 1
                if p < 1.0 and rng.random() >= p:
                    stats.rejected_sampling += 1
                    continue
                if low_budget:
                    if same_script:
                        stats.low_accepted_same += 1
                    else:
                        stats.low_accepted_cross += 1
                seen.add(key)
                budgets[spair] = remaining - 1
                pairs.append(PairRecord(
                    anchor_id=a.id, positive_id=b.id, similarity=sim,
                    script_a=spair[0], script_b=spair[1]))
                stats.emitted += 1
    return pairs, stats


def save_pairs(pairs: list[PairRecord], path: str | Path,
               config_hash: str = "", seed: int = 0) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(artifact_header("pairs", config_hash, seed) + "\n")
        for p in sorted(pairs, key=lambda p: (p.anchor_id, p.positive_id)):
            fh.write(f"{p.anchor_id}\t{p.positive_id}\t{p.similarity:.6f}\t"
                     f"{p.script_a.name}\t{p.script_b.name}\n")


def load_pairs(path: str | Path) -> list[PairRecord]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            a, b, sim, sa, sb = line.split("\t")
            pairs.append(PairRecord(int(a), int(b), float(sim),
                                    ScriptId[sa], ScriptId[sb]))
    return pairs


# ---------------------------------------------------------------------------
# Adjacency set and prefix index

class AdjacencySet:
    """All unordered co-located toponym-id pairs."""

    def __init__(self) -> None:
        self._pairs: set[tuple[int, int]] = set()

    def add(self, a: int, b: int) -> None:
        if a != b:
            self._pairs.add((a, b) if a < b else (b, a))

    def __contains__(self, pair: tuple[int, int]) -> bool:
        a, b = pair
        return ((a, b) if a < b else (b, a)) in self._pairs

    def __len__(self) -> int:
        return len(self._pairs)


def build_adjacency(store: ToponymStore) -> AdjacencySet:
    """Complete graph over each place's toponyms, merged across places."""
    adj = AdjacencySet()
    for place_id in sorted(store.place_map):
        ids = store.place_map[place_id]
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                adj.add(ids[i], ids[j])
    return adj


PREFIX_PAD = "_"


def prefix_key(rec: ToponymRecord, rom: str) -> tuple[str, ScriptId] | None:
    """(2-char romanised prefix, script); None when romanisation is empty."""
    if not rom:
        return None
    prefix = rom[:2] if len(rom) >= 2 else rom + PREFIX_PAD
    return (prefix, rec.script)


class PrefixIndex:
    def __init__(self) -> None:
        self._buckets: dict[tuple[str, ScriptId], list[int]] = {}
        self.excluded_empty = 0

    def bucket(self, key: tuple[str, ScriptId]) -> list[int]:
        return self._buckets.get(key, [])

    def key_count(self) -> int:
        return len(self._buckets)

    def entry_count(self) -> int:
        return sum(len(v) for v in self._buckets.values())


def build_prefix_index(store: ToponymStore) -> PrefixIndex:
    index = PrefixIndex()
    for rec in store:
        key = prefix_key(rec, romanise(rec.name))
        if key is None:
            index.excluded_empty += 1
            continue
        index._buckets.setdefault(key, []).append(rec.id)
    return index


# ---------------------------------------------------------------------------
# Triplet generation

@dataclass
class TripletGenStats:
    emitted: int = 0
    skipped_pairs: int = 0
    rejected_draws: int = 0


def gen_triplets(pairs: list[PairRecord],
                 store: ToponymStore,
                 kind: str,
                 adjacency: AdjacencySet,
                 prefix_index: PrefixIndex | None,
                 seed: int,
                 max_draws: int = 32,
                 ) -> tuple[list[Triplet], TripletGenStats]:
    """One triplet per pair with a rejection-sampled negative.

    ``random`` draws negatives uniformly from the full pool; ``hard`` draws
    from the anchor's (romanised 2-char prefix, script) bucket. Negatives
    adjacent to the anchor, or equal to anchor/positive, are rejected; a
    pair is skipped after ``max_draws`` failed draws.
    """
    if len(store) == 0:
        raise ValueError("empty toponym pool")
    if kind not in ("random", "hard"):
        raise ValueError(f"unknown triplet kind: {kind}")
    if kind == "hard" and prefix_index is None:
        raise ValueError("hard triplets require a prefix index")
    rng = random.Random(seed)
    stats = TripletGenStats()
    triplets: list[Triplet] = []
    pool_size = len(store)
    for pair in pairs:
        anchor, positive = pair.anchor_id, pair.positive_id
        candidates: list[int] | None = None
        if kind == "hard":
            assert prefix_index is not None
            key = prefix_key(store[anchor], romanise(store[anchor].name))
            candidates = prefix_index.bucket(key) if key else []
            if not candidates:
                stats.skipped_pairs += 1
                continue
        negative = None
        for _ in range(max_draws):
            if kind == "random":
                cand = rng.randrange(pool_size)
            else:
                cand = candidates[rng.randrange(len(candidates))]
            if cand == anchor or cand == positive or (anchor, cand) in adjacency:
                stats.rejected_draws += 1
                continue
            negative = cand
            break
        if negative is None:
            stats.skipped_pairs += 1
            continue
        triplets.append(Triplet(anchor, positive, negative, kind))
        stats.emitted += 1
    return triplets, stats


def save_triplets(triplets: list[Triplet], path: str | Path,
                  config_hash: str = "", seed: int = 0) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(artifact_header("triplets", config_hash, seed) + "\n")
        ordered = sorted(triplets, key=lambda t: (t.anchor_id, t.positive_id,
                                                  t.negative_id))
        for t in ordered:
            fh.write(f"{t.anchor_id}\t{t.positive_id}\t{t.negative_id}\t"
                     f"{t.kind}\n")


def load_triplets(path: str | Path) -> list[Triplet]:
    triplets = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            a, p, n, kind = line.split("\t")
            triplets.append(Triplet(int(a), int(p), int(n), kind))
    return triplets
