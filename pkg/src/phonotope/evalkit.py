"""Baselines, retrieval metrics, diagnostics and the benchmark harness.

Baselines rank candidates by string similarity over romanised forms
(normalised Levenshtein or Jaro-Winkler); the model path ranks by cosine
over Student embeddings. Both report R@1/R@5/R@10 and MRR per testset with
a deterministic ascending-id tie-break, so rankings are invariant under
candidate order permutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import norm_lev_sim
from .encoder import StudentEncoder, cosine, student_forward
from .scriptkit import ScriptId, detect_script, preprocess, romanise
from .vocab import LangTable, Vocabulary

_DATA_DIR = Path(__file__).parent / "data"

DIAGNOSTIC_PAIRS_FILE = _DATA_DIR / "diagnostic_pairs.tsv"

METRIC_KS = (1, 5, 10)


def jaro(a: str, b: str) -> float:
    """Standard Jaro similarity (match window, transposition count)."""
    if a == b:
        return 1.0
    if not a or not b:
        return 0.0
    window = max(len(a), len(b)) // 2 - 1
    window = max(window, 0)
    a_match = [False] * len(a)
    b_match = [False] * len(b)
    matches = 0
    for i, ca in enumerate(a):
        lo = max(0, i - window)
        hi = min(len(b), i + window + 1)
        for j in range(lo, hi):
            if not b_match[j] and b[j] == ca:
                a_match[i] = True
                b_match[j] = True
                matches += 1
                break
    if matches == 0:
        return 0.0
    transpositions = 0
    j = 0
    for i, ca in enumerate(a):
        if not a_match[i]:
            continue
        while not b_match[j]:
            j += 1
        if ca != b[j]:
            transpositions += 1
        j += 1
    transpositions //= 2
    m = matches
    return (m / len(a) + m / len(b) + (m - transpositions) / m) / 3.0


def jaro_winkler(a: str, b: str, prefix_weight: float = 0.1,
                 max_prefix: int = 4) -> float:
    """Jaro plus an unconditional shared-prefix boost (cap 4, p = 0.1)."""
    base = jaro(a, b)
    prefix = 0
    for ca, cb in zip(a, b):
        if ca != cb or prefix >= max_prefix:
            break
        prefix += 1
    return base + prefix * prefix_weight * (1.0 - base)


# ---------------------------------------------------------------------------
# Retrieval metrics

def recall_at_k(ranked_ids: list[list[int]], truths: list[int],
                k: int) -> float:
    """Fraction of queries whose truth appears in the top k."""
    if not ranked_ids:
        raise ValueError("no queries")
    hits = sum(truth in ids[:k] for ids, truth in zip(ranked_ids, truths))
    return hits / len(ranked_ids)


def mrr(ranked_ids: list[list[int]], truths: list[int]) -> float:
    """Mean reciprocal rank; absent truth contributes 0."""
    if not ranked_ids:
        raise ValueError("no queries")
    total = 0.0
    for ids, truth in zip(ranked_ids, truths):
        if truth in ids:
            total += 1.0 / (ids.index(truth) + 1)
    return total / len(ranked_ids)


# ---------------------------------------------------------------------------
# Testsets

@dataclass
class Testset:
    name: str
    queries: list[tuple[str, ScriptId, int]]   # (query, script, truth id)
    candidates: list[tuple[int, str]]          # (candidate id, name)

    def __post_init__(self) -> None:
        cand_ids = {i for i, _ in self.candidates}
        for query, _, truth in self.queries:
            if truth not in cand_ids:
                raise ValueError(
                    f"testset {self.name}: ground truth {truth} for "
                    f"{query!r} missing from candidates")


def load_testset(queries_path: str | Path,
                 candidates_path: str | Path,
                 name: str | None = None) -> Testset:
    """Queries TSV: query TAB query_script TAB truth_candidate_id.
    Candidates TSV: candidate_id TAB name."""
    queries = []
    with open(queries_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            query, script, truth = line.split("\t")
            queries.append((query, ScriptId[script], int(truth)))
    candidates = []
    with open(candidates_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            ident, cand_name = line.split("\t")
            candidates.append((int(ident), cand_name))
    return Testset(name or Path(queries_path).stem, queries, candidates)


def discover_testsets(directory: str | Path) -> list[Testset]:
    """Load every '<name>.queries.tsv' + '<name>.candidates.tsv' pair."""
    directory = Path(directory)
    testsets = []
    for qpath in sorted(directory.glob("*.queries.tsv")):
        name = qpath.name.removesuffix(".queries.tsv")
        cpath = directory / f"{name}.candidates.tsv"
        if not cpath.exists():
            raise FileNotFoundError(f"missing candidates file: {cpath}")
        testsets.append(load_testset(qpath, cpath, name))
    return testsets


def convert_mehdie(source_dir: str | Path, out_dir: str | Path) -> list[str]:
    """Convert MEHDIE benchmark exports into the harness testset format.

    Expected input: one TSV per testset named ``TS<n>.tsv`` with columns
        source_name, source_script, target_id, plus a shared
        ``candidates.tsv`` with columns target_id, target_name.
    This mirrors the benchmark's query/candidate split: queries are names
    from one corpus (e.g. Hebrew travel narratives), candidates the linked
    names from the other (e.g. Arabic geographies). Scripts must be given
    as ScriptId names (HEBREW, ARABIC, ...).
    """
    source_dir, out_dir = Path(source_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    shared = source_dir / "candidates.tsv"
    written = []
    for ts in sorted(source_dir.glob("TS*.tsv")):
        name = ts.stem
        (out_dir / f"{name}.queries.tsv").write_text(
            ts.read_text(encoding="utf-8"), encoding="utf-8")
        cand = ts.with_name(f"{name}.candidates.tsv")
        src = cand if cand.exists() else shared
        if not src.exists():
            raise FileNotFoundError(
                f"no candidates file for {name} (looked for {cand} and {shared})")
        (out_dir / f"{name}.candidates.tsv").write_text(
            src.read_text(encoding="utf-8"), encoding="utf-8")
        written.append(name)
    return written


# ---------------------------------------------------------------------------
# Harness

@dataclass
class MetricsTable:
    rows: list[tuple[str, str, float]] = field(default_factory=list)

    def add(self, testset: str, metric: str, value: float) -> None:
        self.rows.append((testset, metric, value))

    def value(self, testset: str, metric: str) -> float:
        for ts, m, v in self.rows:
            if ts == testset and m == metric:
                return v
        raise KeyError((testset, metric))

    def as_tsv(self) -> str:
        lines = ["testset\tmetric\tvalue"]
        for ts, metric, value in self.rows:
            lines.append(f"{ts}\t{metric}\t{value:.6f}")
        return "\n".join(lines) + "\n"


def _rank(scored: list[tuple[float, int]], k: int | None = None) -> list[int]:
    """Descending score, ascending id on ties."""
    order = sorted(scored, key=lambda si: (-si[0], si[1]))
    ids = [i for _, i in order]
    return ids if k is None else ids[:k]


def _metric_rows(table: MetricsTable, name: str,
                 ranked: list[list[int]], truths: list[int]) -> None:
    for k in METRIC_KS:
        table.add(name, f"R@{k}", recall_at_k(ranked, truths, k))
    table.add(name, "MRR", mrr(ranked, truths))


def run_baseline(testsets: list[Testset], metric: str = "lev") -> MetricsTable:
    """Rank candidates by string similarity over romanised, case-folded forms."""
    if not testsets:
        raise ValueError("no testsets")
    if metric == "lev":
        sim = norm_lev_sim
    elif metric == "jw":
        sim = jaro_winkler
    else:
        raise ValueError(f"unknown baseline metric: {metric}")
    table = MetricsTable()
    averages: dict[str, list[float]] = {}
    for ts in testsets:
        if not ts.queries:
            raise ValueError(f"empty testset: {ts.name}")
        cand_rom = [(ident, romanise(name)) for ident, name in ts.candidates]
        ranked, truths = [], []
        for query, _, truth in ts.queries:
            q_rom = romanise(query)
            scored = [(sim(q_rom, rom), ident) for ident, rom in cand_rom]
            ranked.append(_rank(scored, max(METRIC_KS)))
            truths.append(truth)
        _metric_rows(table, ts.name, ranked, truths)
    for name in [f"R@{k}" for k in METRIC_KS] + ["MRR"]:
        vals = [v for ts, m, v in table.rows if m == name]
        averages[name] = vals
    for name, vals in averages.items():
        table.add("average", name, float(np.mean(vals)))
    return table


@dataclass
class StudentRuntime:
    """Everything needed to embed free-text names with a trained Student."""

    student: StudentEncoder
    vocab: Vocabulary
    langs: LangTable
    checkpoint_meta: dict = field(default_factory=dict)

    def embed(self, name: str, lang: str | None = None) -> np.ndarray:
        ts = preprocess(name)
        return student_forward(self.student, self.vocab, self.langs,
                               ts, detect_script(name), lang)


def run_model(testsets: list[Testset], runtime: StudentRuntime,
              index=None) -> MetricsTable:
    """Rank candidates by Student-embedding cosine.

    When a prebuilt index is supplied its checkpoint hash must match the
    runtime's; otherwise candidates are embedded on the fly.
    """
    if not testsets:
        raise ValueError("no testsets")
    if index is not None:
        idx_hash = index.store.metadata.get("checkpoint_hash", "")
        rt_hash = runtime.checkpoint_meta.get("checkpoint_hash", "")
        if idx_hash and rt_hash and idx_hash != rt_hash:
            raise ValueError(
                "index was built with a different student checkpoint "
                f"({idx_hash[:12]} != {rt_hash[:12]})")
    table = MetricsTable()
    for ts in testsets:
        if not ts.queries:
            raise ValueError(f"empty testset: {ts.name}")
        cand_embs = [(ident, runtime.embed(name))
                     for ident, name in ts.candidates]
        ranked, truths = [], []
        for query, _, truth in ts.queries:
            q_emb = runtime.embed(query)
            scored = [(cosine(q_emb, emb), ident)
                      for ident, emb in cand_embs]
            ranked.append(_rank(scored, max(METRIC_KS)))
            truths.append(truth)
        _metric_rows(table, ts.name, ranked, truths)
    for name in [f"R@{k}" for k in METRIC_KS] + ["MRR"]:
        vals = [v for tsname, m, v in table.rows if m == name]
        table.add("average", name, float(np.mean(vals)))
    return table


# ---------------------------------------------------------------------------
# Diagnostics

PASS_SIMILAR = 0.85    # cross-script and diacritic pairs must clear this
PASS_UNRELATED = 0.50  # unrelated pairs must stay below this

DIAGNOSTIC_CATEGORIES = (
    "cross-script", "same-script-cross-language", "unrelated", "diacritic",
)


@dataclass
class DiagnosticPair:
    name_a: str
    name_b: str
    category: str
    lang_a: str | None = None
    lang_b: str | None = None


def load_diagnostic_pairs(path: str | Path = DIAGNOSTIC_PAIRS_FILE
                          ) -> list[DiagnosticPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            name_a, name_b, category = fields[:3]
            lang_a = fields[3] or None if len(fields) > 3 else None
            lang_b = fields[4] or None if len(fields) > 4 else None
            if category not in DIAGNOSTIC_CATEGORIES:
                raise ValueError(f"unknown diagnostic category: {category}")
            pairs.append(DiagnosticPair(name_a, name_b, category,
                                        lang_a, lang_b))
    return pairs


@dataclass
class DiagnosticReport:
    # category -> (passed or None for informational, total, mean cosine)
    categories: dict[str, tuple[int | None, int, float]] = field(
        default_factory=dict)
    scores: list[tuple[str, str, str, float]] = field(default_factory=list)

    def as_tsv(self) -> str:
        lines = ["category\tpassed\ttotal"]
        for cat in DIAGNOSTIC_CATEGORIES:
            if cat not in self.categories:
                continue
            passed, total, _ = self.categories[cat]
            passed_s = "-" if passed is None else str(passed)
            lines.append(f"{cat}\t{passed_s}\t{total}")
        return "\n".join(lines) + "\n"


def run_diagnostics(runtime: StudentRuntime,
                    pairs: list[DiagnosticPair]) -> DiagnosticReport:
    """Pass rules: similar categories at cosine >= 0.85, unrelated at
    < 0.50; same-script-cross-language is reported without a threshold."""
    report = DiagnosticReport()
    by_cat: dict[str, list[float]] = {c: [] for c in DIAGNOSTIC_CATEGORIES}
    for pair in pairs:
        score = cosine(runtime.embed(pair.name_a, pair.lang_a),
                       runtime.embed(pair.name_b, pair.lang_b))
        by_cat[pair.category].append(score)
        report.scores.append((pair.name_a, pair.name_b, pair.category, score))
    for cat, scores in by_cat.items():
        if not scores:
            continue
        if cat in ("cross-script", "diacritic"):
            passed = sum(s >= PASS_SIMILAR for s in scores)
        elif cat == "unrelated":
            passed = sum(s < PASS_UNRELATED for s in scores)
        else:
            passed = None
        report.categories[cat] = (passed, len(scores), float(np.mean(scores)))
    return report
