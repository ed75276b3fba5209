import random

import pytest

from phonotope.config import PipelineConfig, QuotaTable, TrainConfig
from phonotope.corpus import ToponymStore, ingest
from phonotope.phonetics import FeatureTable, load_bundled_provider
from phonotope.toycorpus import ToyCorpusConfig, generate
from phonotope.vocab import LangTable, build_vocab


@pytest.fixture(scope="session")
def feature_table():
    return FeatureTable()


@pytest.fixture(scope="session")
def provider():
    return load_bundled_provider()


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """A 300-place toy gazetteer shared by the fast tests."""
    out = tmp_path_factory.mktemp("tiny_corpus")
    return generate(ToyCorpusConfig(n_places=300, seed=13, holdout=40), out)


@pytest.fixture(scope="session")
def tiny_store(tiny_corpus) -> ToponymStore:
    with open(tiny_corpus.places_path, encoding="utf-8") as fh:
        store, _ = ingest(fh)
    return store


@pytest.fixture(scope="session")
def tiny_vocab(tiny_store):
    return build_vocab(rec.name for rec in tiny_store)


@pytest.fixture(scope="session")
def tiny_langs(tiny_store):
    return LangTable(rec.lang for rec in tiny_store if rec.lang)


def pipeline_config(work, corpus, **overrides) -> PipelineConfig:
    """PipelineConfig with every artifact routed under ``work``."""
    cfg = PipelineConfig(
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
        quotas=QuotaTable(n_per_pair=2000),
        phase1=TrainConfig.phase1(epochs=3, seed=7),
        phase2=TrainConfig.phase2(epochs=3, seed=7),
        phase3=TrainConfig.phase3(epochs=2, seed=7),
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


@pytest.fixture()
def rng():
    return random.Random(0xC0FFEE)
