"""Command-line pipeline: curation, training, indexing, retrieval, eval.

Every stage reads and writes versioned artifacts stamped with the config
hash and seed, and is idempotent for identical inputs and seed. Exit
codes: 0 ok, 1 user error (missing artifact, bad arguments), 2 internal
error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import torch

from . import corpus as corpus_mod
from . import evalkit, index as index_mod, training, toycorpus
from .config import EncoderConfig, PipelineConfig
from .encoder import (StudentEncoder, TeacherEncoder, checkpoint_hash,
                      init_params, load_checkpoint, param_count)
from .phonetics import FeatureTable, load_bundled_provider
from .scriptkit import detect_script, preprocess
from .vocab import LangTable, Vocabulary, build_vocab


class UserError(Exception):
    """Recoverable operator mistake; prints to stderr and exits 1."""


def _require(path: str | Path, what: str, hint: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise UserError(f"{what} required: {path} (run `{hint}` first)")
    return path


def _corpus_names(path: Path):
    import json
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError:
                continue
            for entry in doc.get("toponyms", []):
                name = entry.get("name")
                if name:
                    yield name


def _provider(cfg: PipelineConfig):
    provider = load_bundled_provider(cfg.g2p_langs or None)
    if cfg.overlay:
        provider.add_overlay_file(
            _require(cfg.overlay, "precomputed-IPA overlay",
                     "remove overlay from config or provide the file"))
    return provider


def cmd_build_vocab(cfg: PipelineConfig) -> Vocabulary:
    corpus_path = _require(cfg.corpus, "corpus file",
                           "provide a place-documents JSON-lines file")
    vocab = build_vocab(_corpus_names(corpus_path))
    Path(cfg.vocab).parent.mkdir(parents=True, exist_ok=True)
    vocab.save(cfg.vocab)
    print(f"vocab: {len(vocab)} tokens -> {cfg.vocab}")
    return vocab


def cmd_ingest(cfg: PipelineConfig):
    corpus_path = _require(cfg.corpus, "corpus file",
                           "provide a place-documents JSON-lines file")
    with open(corpus_path, encoding="utf-8") as fh:
        store, report = corpus_mod.ingest(fh)
    Path(cfg.toponyms).parent.mkdir(parents=True, exist_ok=True)
    store.save(cfg.toponyms, cfg.config_hash(), cfg.seed)
    langs = LangTable(rec.lang for rec in store if rec.lang)
    langs.save(cfg.langs)
    print(f"ingested {report.kept} toponyms "
          f"({report.filtered_preromanised} pre-romanised filtered, "
          f"{report.malformed_lines} malformed) -> {cfg.toponyms}")
    if report.by_lang_script:
        top = sorted(report.by_lang_script.items(),
                     key=lambda kv: -kv[1])[:5]
        for (lang, script), count in top:
            print(f"  filtered {lang}/{script}: {count}")
    return store, report


def cmd_gen_pairs(cfg: PipelineConfig):
    store = corpus_mod.ToponymStore.load(
        _require(cfg.toponyms, "toponym store", "phonotope ingest"))
    exclude: frozenset[int] = frozenset()
    if cfg.exclude_places:
        exclude = toycorpus.load_holdout(
            _require(cfg.exclude_places, "holdout place list",
                     "remove exclude_places from config"))
    pairs, stats = corpus_mod.gen_pairs(store, cfg.quotas, cfg.seed, exclude)
    corpus_mod.save_pairs(pairs, cfg.pairs, cfg.config_hash(), cfg.seed)
    print(f"pairs: {stats.emitted}/{stats.candidates} candidates emitted "
          f"(threshold {stats.rejected_threshold}, dup "
          f"{stats.rejected_duplicate}, quota {stats.rejected_quota}, "
          f"sampling {stats.rejected_sampling}) -> {cfg.pairs}")
    return pairs, stats


def cmd_gen_triplets(cfg: PipelineConfig, kind: str):
    store = corpus_mod.ToponymStore.load(
        _require(cfg.toponyms, "toponym store", "phonotope ingest"))
    pairs = corpus_mod.load_pairs(
        _require(cfg.pairs, "pair file", "phonotope gen-pairs"))
    adjacency = corpus_mod.build_adjacency(store)
    prefix_index = corpus_mod.build_prefix_index(store) if kind == "hard" else None
    triplets, stats = corpus_mod.gen_triplets(
        pairs, store, kind, adjacency, prefix_index, cfg.seed)
    out = cfg.triplets_hard if kind == "hard" else cfg.triplets_random
    corpus_mod.save_triplets(triplets, out, cfg.config_hash(), cfg.seed)
    print(f"triplets[{kind}]: {stats.emitted} emitted, "
          f"{stats.skipped_pairs} pairs skipped -> {out}")
    return triplets, stats


def _ckpt_paths(cfg: PipelineConfig) -> dict[str, Path]:
    d = Path(cfg.checkpoint_dir)
    return {
        "teacher": d / "teacher.ckpt",
        "student_phase2": d / "student_phase2.ckpt",
        "student_phase3": d / "student_phase3.ckpt",
        "log": d / "train_log.tsv",
    }


def _load_tables(cfg: PipelineConfig) -> tuple[Vocabulary, LangTable]:
    vocab = Vocabulary.load(
        _require(cfg.vocab, "vocabulary", "phonotope build-vocab"))
    langs = LangTable.load(
        _require(cfg.langs, "language table", "phonotope ingest"))
    return vocab, langs


def _encoder_config(cfg: PipelineConfig, vocab: Vocabulary,
                    langs: LangTable) -> EncoderConfig:
    enc = EncoderConfig(**{**cfg.encoder.__dict__,
                           "vocab_size": len(vocab),
                           "n_langs": len(langs)})
    return enc


def cmd_train(cfg: PipelineConfig, phase: int):
    paths = _ckpt_paths(cfg)
    Path(cfg.checkpoint_dir).mkdir(parents=True, exist_ok=True)
    store = corpus_mod.ToponymStore.load(
        _require(cfg.toponyms, "toponym store", "phonotope ingest"))
    vocab, langs = _load_tables(cfg)
    enc_cfg = _encoder_config(cfg, vocab, langs)
    provider = _provider(cfg)
    ftable = FeatureTable()
    encoded = training.encode_store(store, provider, ftable)
    extra = {"vocab_hash": vocab.content_hash(),
             "langs_hash": langs.content_hash()}

    if phase == 1:
        triplets = corpus_mod.load_triplets(
            _require(cfg.triplets_random, "random-negative triplets",
                     "phonotope gen-triplets --kind random"))
        params = init_params(enc_cfg, cfg.seed)
        usable, survival = training.filter_feature_triplets(triplets, encoded)
        print(f"phase 1: {survival.survived}/{survival.generated} triplets "
              f"have full features ({survival.rate:.3f}); teacher has "
              f"{param_count(params.teacher)} parameters")
        result = training.train_phase1(params.teacher, triplets, encoded,
                                       cfg.phase1, paths["teacher"], extra)
    elif phase == 2:
        teacher_path = _require(paths["teacher"], "teacher checkpoint",
                                "phonotope train --phase 1")
        teacher, _ = load_checkpoint(teacher_path)
        samples = [e for e in encoded.values() if e.features is not None]
        samples.sort(key=lambda e: e.toponym_id)
        if not samples:
            raise UserError("no toponyms with phonetic features; check the "
                            "G2P provider configuration")
        targets = training.teacher_targets(teacher, encoded,
                                           [s.toponym_id for s in samples])
        student = init_params(enc_cfg, cfg.seed).student
        print(f"phase 2: {len(samples)} distillation samples; student has "
              f"{param_count(student)} parameters")
        result = training.train_phase2(student, samples, targets, vocab,
                                       langs, cfg.phase2,
                                       paths["student_phase2"], extra)
    elif phase == 3:
        student_path = _require(paths["student_phase2"], "student checkpoint",
                                "phonotope train --phase 2")
        student, _ = load_checkpoint(student_path)
        triplets = corpus_mod.load_triplets(
            _require(cfg.triplets_hard, "hard-negative triplets",
                     "phonotope gen-triplets --kind hard"))
        print(f"phase 3: {len(triplets)} hard triplets")
        result = training.train_phase3(student, triplets, encoded, vocab,
                                       langs, cfg.phase3,
                                       paths["student_phase3"], extra)
    else:
        raise UserError(f"unknown phase: {phase}")

    training.write_train_log(paths["log"], result.logs)
    for log in result.logs:
        sim = f" val_sim={log.val_sim:.4f}" if log.val_sim is not None else ""
        print(f"  epoch {log.epoch}: train={log.train_loss:.6f} "
              f"val={log.val_loss:.6f}{sim}")
    print(f"best epoch {result.best_epoch} "
          f"(val {result.best_val_loss:.6f}) -> {result.checkpoint_path}")
    return result


def _best_student_path(cfg: PipelineConfig) -> Path:
    paths = _ckpt_paths(cfg)
    if paths["student_phase3"].exists():
        return paths["student_phase3"]
    return _require(paths["student_phase2"], "student checkpoint",
                    "phonotope train --phase 2")


def load_student_runtime(cfg: PipelineConfig) -> evalkit.StudentRuntime:
    vocab, langs = _load_tables(cfg)
    path = _best_student_path(cfg)
    student, header = load_checkpoint(path)
    if not isinstance(student, StudentEncoder):
        raise UserError(f"checkpoint {path} is not a student network")
    if header["vocab_hash"] != vocab.content_hash():
        raise UserError(f"checkpoint {path} was trained with a different "
                        "vocabulary (hash mismatch)")
    meta = dict(header)
    meta["checkpoint_hash"] = checkpoint_hash(path)
    return evalkit.StudentRuntime(student, vocab, langs, meta)


def cmd_embed(cfg: PipelineConfig):
    store = corpus_mod.ToponymStore.load(
        _require(cfg.toponyms, "toponym store", "phonotope ingest"))
    runtime = load_student_runtime(cfg)
    torch.set_num_threads(max(cfg.phase2.threads, 1))
    ids, vectors = [], []
    batch: list[tuple[int, list[int], int, int]] = []

    def flush():
        if not batch:
            return
        rows = [(token_ids, script, lang) for _, token_ids, script, lang in batch]
        chars, scripts, langs_t, lengths = training._token_batch(rows)
        with torch.no_grad():
            emb = runtime.student(chars, scripts, langs_t, lengths).numpy()
        for (ident, _, _, _), vec in zip(batch, emb):
            ids.append(ident)
            vectors.append(vec)
        batch.clear()

    for rec in store:
        ts = preprocess(rec.name)
        batch.append((rec.id, runtime.vocab.encode(ts), int(rec.script),
                      runtime.langs.lookup(rec.lang)))
        if len(batch) >= 256:
            flush()
    flush()
    emb_store = index_mod.EmbeddingStore(
        np.array(ids, dtype=np.int64), np.stack(vectors),
        {"checkpoint_hash": runtime.checkpoint_meta["checkpoint_hash"],
         "config_hash": cfg.config_hash(), "seed": cfg.seed})
    Path(cfg.embeddings).parent.mkdir(parents=True, exist_ok=True)
    emb_store.save(cfg.embeddings)
    print(f"embedded {len(emb_store)} toponyms -> {cfg.embeddings}")
    return emb_store


def cmd_index(cfg: PipelineConfig, mode: str | None = None):
    emb_store = index_mod.EmbeddingStore.load(
        _require(cfg.embeddings, "embedding store", "phonotope embed"))
    mode = mode or cfg.index_mode
    params = index_mod.HnswParams(
        m=cfg.hnsw_m, ef_construction=cfg.hnsw_ef_construction,
        ef_search=cfg.hnsw_ef_search, seed=cfg.seed)
    idx = index_mod.build(emb_store, mode, params)
    idx.save(cfg.index)
    print(f"{mode} index over {len(emb_store)} vectors -> {cfg.index}")
    return idx


def cmd_query(cfg: PipelineConfig, name: str, lang: str | None, k: int):
    idx = index_mod.Index.load(
        _require(cfg.index, "similarity index", "phonotope index"))
    runtime = load_student_runtime(cfg)
    store = corpus_mod.ToponymStore.load(
        _require(cfg.toponyms, "toponym store", "phonotope ingest"))
    result = idx.query(runtime.embed(name, lang), k)
    for ident, score in result.hits:
        print(f"{ident}\t{score:.4f}\t{store[ident].name}")
    return result


def cmd_evaluate(cfg: PipelineConfig, testset_dir: str, metric: str):
    testsets = evalkit.discover_testsets(
        _require(testset_dir, "testset directory",
                 "provide *.queries.tsv/*.candidates.tsv files"))
    if not testsets:
        raise UserError(f"no testsets found under {testset_dir}")
    if metric in ("lev", "jw"):
        table = evalkit.run_baseline(testsets, metric)
    elif metric == "model":
        table = evalkit.run_model(testsets, load_student_runtime(cfg))
    else:
        raise UserError(f"unknown metric: {metric}")
    reports = Path(cfg.reports)
    reports.mkdir(parents=True, exist_ok=True)
    out = reports / f"metrics_{metric}.tsv"
    out.write_text(table.as_tsv(), encoding="utf-8")
    print(table.as_tsv(), end="")
    print(f"-> {out}")
    return table


def cmd_diagnostics(cfg: PipelineConfig, pairs_path: str | None):
    pairs = evalkit.load_diagnostic_pairs(
        pairs_path or evalkit.DIAGNOSTIC_PAIRS_FILE)
    runtime = load_student_runtime(cfg)
    report = evalkit.run_diagnostics(runtime, pairs)
    reports = Path(cfg.reports)
    reports.mkdir(parents=True, exist_ok=True)
    out = reports / "diagnostics.tsv"
    out.write_text(report.as_tsv(), encoding="utf-8")
    for name_a, name_b, category, score in report.scores:
        print(f"{name_a} / {name_b} [{category}]: {score:.3f}")
    print(report.as_tsv(), end="")
    print(f"-> {out}")
    return report


def _apply_overrides(cfg: PipelineConfig, overrides: list[str]) -> None:
    for item in overrides:
        if "=" not in item:
            raise UserError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        target = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            if not hasattr(target, part):
                raise UserError(f"unknown config field: {key}")
            target = getattr(target, part)
        leaf = parts[-1]
        if not hasattr(target, leaf):
            raise UserError(f"unknown config field: {key}")
        current = getattr(target, leaf)
        if isinstance(current, bool):
            value = value.lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            value = int(value)
        elif isinstance(current, float):
            value = float(value)
        elif isinstance(current, list):
            value = [v for v in value.split(",") if v]
        setattr(target, leaf, value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phonotope",
        description="Cross-script phonetic toponym embedding pipeline")
    parser.add_argument("--config", help="pipeline config YAML")
    parser.add_argument("--set", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="override a config field (dotted path)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("build-vocab")
    sub.add_parser("ingest")
    sub.add_parser("gen-pairs")
    p = sub.add_parser("gen-triplets")
    p.add_argument("--kind", choices=("random", "hard"), required=True)
    p = sub.add_parser("train")
    p.add_argument("--phase", type=int, choices=(1, 2, 3), required=True)
    sub.add_parser("embed")
    p = sub.add_parser("index")
    p.add_argument("--mode", choices=("exact", "hnsw"))
    p = sub.add_parser("query")
    p.add_argument("--name", required=True)
    p.add_argument("--lang")
    p.add_argument("-k", type=int, default=10)
    p = sub.add_parser("evaluate")
    p.add_argument("--testsets", required=True)
    p.add_argument("--metric", choices=("lev", "jw", "model"), default="lev")
    p = sub.add_parser("diagnostics")
    p.add_argument("--pairs")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = (PipelineConfig.load(args.config) if args.config
               else PipelineConfig())
        _apply_overrides(cfg, args.set)
        if args.command == "build-vocab":
            cmd_build_vocab(cfg)
        elif args.command == "ingest":
            cmd_ingest(cfg)
        elif args.command == "gen-pairs":
            cmd_gen_pairs(cfg)
        elif args.command == "gen-triplets":
            cmd_gen_triplets(cfg, args.kind)
        elif args.command == "train":
            cmd_train(cfg, args.phase)
        elif args.command == "embed":
            cmd_embed(cfg)
        elif args.command == "index":
            cmd_index(cfg, args.mode)
        elif args.command == "query":
            cmd_query(cfg, args.name, args.lang, args.k)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.testsets, args.metric)
        elif args.command == "diagnostics":
            cmd_diagnostics(cfg, args.pairs)
        return 0
    except (UserError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - report then fail
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
