import random

import numpy as np
import pytest

from phonotope.phonetics import (
    FEATURE_DIM,
    FeatureTable,
    G2pProvider,
    PhoneticsError,
    coverage,
    load_bundled_provider,
)

GOLDEN = "tests/data/g2p_golden.tsv"


def test_feature_table_loads_with_24_dims(feature_table):
    assert len(feature_table) > 30
    for segment in feature_table.segments():
        vec = feature_table.lookup(segment)
        assert vec.shape == (FEATURE_DIM,)
        assert set(np.unique(vec)) <= {0, 1}


def test_p_and_b_differ_only_in_voicing(feature_table):
    p, b = feature_table.lookup("p"), feature_table.lookup("b")
    diff = np.nonzero(p != b)[0]
    assert list(diff) == [8]  # the voi column


def test_features_shape_and_unknown_dropping(feature_table):
    out = feature_table.features(["b", "a"])
    assert out.shape == (2, FEATURE_DIM)
    before = feature_table.unknown_segments
    out = feature_table.features(["b", "NOPE", "a"])
    assert out.shape == (2, FEATURE_DIM)
    assert feature_table.unknown_segments == before + 1


def test_features_empty_and_all_unknown_raise(feature_table):
    with pytest.raises(PhoneticsError, match="no phonetic features"):
        feature_table.features([])
    with pytest.raises(PhoneticsError, match="no phonetic features"):
        feature_table.features(["NOPE", "ALSO-NOPE"])


def test_bundled_provider_covers_multiple_scripts(provider):
    langs = provider.languages()
    assert len(langs) >= 4
    assert {"de", "ru", "el", "ka", "he", "ko", "eo"} <= set(langs)


def test_transcribe_unsupported_language_returns_none(provider):
    assert provider.transcribe("London", "xx") is None
    assert provider.transcribe("London", None) is None


def test_transcribe_deterministic(provider):
    a = provider.transcribe("Берлин", "ru")
    b = provider.transcribe("Берлин", "ru")
    assert a == b == ["b", "e", "r", "l", "i", "n"]


def test_golden_transcriptions(provider):
    """Rule tables applied by hand on seed names, frozen as a data file."""
    with open(GOLDEN, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            lang, text, expected = line.split("\t")
            got = provider.transcribe(text, lang)
            assert got == expected.split(), (lang, text, got)


def test_overlay_takes_precedence(provider, tmp_path):
    overlay = tmp_path / "overlay.tsv"
    overlay.write_text("42\tz u\n", encoding="utf-8")
    p = G2pProvider(tables=dict(provider.tables))
    assert p.add_overlay_file(overlay) == 1
    assert p.transcribe("Берлин", "ru", toponym_id=42) == ["z", "u"]
    assert p.transcribe("Берлин", "ru", toponym_id=7) == ["b", "e", "r", "l", "i", "n"]
    # overlay even answers for otherwise unsupported languages
    assert p.transcribe("whatever", "xx", toponym_id=42) == ["z", "u"]


def test_malformed_overlay_raises(provider, tmp_path):
    overlay = tmp_path / "overlay.tsv"
    overlay.write_text("not-an-id\tz u\n", encoding="utf-8")
    with pytest.raises(PhoneticsError):
        G2pProvider(tables=dict(provider.tables)).add_overlay_file(overlay)


def test_malformed_rule_table_raises(tmp_path):
    bad = tmp_path / "xx.tsv"
    bad.write_text("a\tb\tc\td\n", encoding="utf-8")
    from phonotope.phonetics import RuleTable
    with pytest.raises(PhoneticsError):
        RuleTable("xx", bad)


def test_rule_closure_under_feature_table(provider, feature_table):
    """Every segment any bundled rule can emit must resolve to features."""
    for lang, table in provider.tables.items():
        for segs in list(table._rules.values()) + list(table._positional.values()):
            for segment in segs:
                assert segment in feature_table, (lang, segment)


def test_coverage_all_supported(provider, feature_table):
    corpus = [(0, "Берлин", "ru"), (1, "ბერლინი", "ka")]
    assert coverage(corpus, provider, feature_table) == 1.0


def test_coverage_none_supported(provider, feature_table):
    corpus = [(0, "London", "xx"), (1, "Paris", None)]
    assert coverage(corpus, provider, feature_table) == 0.0


def test_coverage_mixed(provider, feature_table):
    corpus = [(0, "Берлин", "ru"), (1, "London", "xx"),
              (2, "בנורל", "he"), (3, "Paris", None)]
    assert coverage(corpus, provider, feature_table) == 0.5


def test_triplet_survival_follows_cube_law(provider, feature_table):
    """Independent availability p -> triplet survival ~= p^3."""
    from phonotope.corpus import Triplet
    from phonotope.training import EncodedName, filter_feature_triplets
    rng = random.Random(99)
    n = 6000
    p = 0.46
    fake_feats = np.ones((3, FEATURE_DIM), dtype=np.uint8)
    encoded = {
        i: EncodedName(i, None, None, None,
                       fake_feats if rng.random() < p else None)
        for i in range(n)
    }
    triplets = [Triplet(rng.randrange(n), rng.randrange(n), rng.randrange(n),
                        "random") for _ in range(30_000)]
    _, stats = filter_feature_triplets(triplets, encoded)
    assert abs(stats.rate - p ** 3) < 0.02
