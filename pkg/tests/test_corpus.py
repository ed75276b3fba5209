import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phonotope.config import QuotaTable
from phonotope.corpus import (
    AdjacencySet,
    build_adjacency,
    build_prefix_index,
    gen_pairs,
    gen_triplets,
    ingest,
    levenshtein,
    load_pairs,
    load_triplets,
    norm_lev_sim,
    prefix_key,
    save_pairs,
    save_triplets,
    ToponymStore,
)
from phonotope.scriptkit import ScriptId, romanise


def oracle_levenshtein(a: str, b: str) -> int:
    """Full-matrix DP, the reference the two-row version must match."""
    rows, cols = len(a) + 1, len(b) + 1
    dp = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        dp[i][0] = i
    for j in range(cols):
        dp[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            dp[i][j] = min(dp[i - 1][j] + 1, dp[i][j - 1] + 1,
                           dp[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return dp[-1][-1]


def test_norm_lev_sim_paper_values():
    assert round(norm_lev_sim("london", "londres"), 2) == 0.57
    assert round(norm_lev_sim(romanise("München"), romanise("Munich")), 2) == 0.57


def test_norm_lev_sim_identity_and_empty():
    assert norm_lev_sim("abc", "abc") == 1.0
    assert norm_lev_sim("", "") == 1.0
    assert norm_lev_sim("", "abc") == 0.0


def test_false_cognates_fall_below_cross_script_threshold():
    # the point of the filter: these pairs must be rejected
    for a, b in (("germany", "deutschland"), ("finland", "suomi"),
                 ("japan", "riben")):
        assert norm_lev_sim(a, b) < 0.35


def test_norm_lev_sim_1000_random_pairs_match_oracle():
    rng = random.Random(12345)
    alphabet = "abcdefgh"
    for _ in range(1000):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
        expected = (1.0 if not a and not b
                    else 1.0 - oracle_levenshtein(a, b) / max(len(a), len(b)))
        assert norm_lev_sim(a, b) == expected


@given(st.text(max_size=16), st.text(max_size=16))
@settings(max_examples=200)
def test_levenshtein_matches_oracle_property(a, b):
    assert levenshtein(a, b) == oracle_levenshtein(a, b)


# -- ingest -------------------------------------------------------------------

def _doc(place_id, toponyms, namespace="gn"):
    return json.dumps({"place_id": place_id, "namespace": namespace,
                       "toponyms": toponyms}, ensure_ascii=False)


def test_ingest_filters_preromanised():
    docs = [
        _doc(1, [{"name": "Zhongguo", "lang": "zh"},
                 {"name": "北京", "lang": "zh"},
                 {"name": "Paris", "lang": "fr"}]),
    ]
    store, report = ingest(docs)
    assert report.kept == 2
    assert report.filtered_preromanised == 1
    assert report.by_lang_script == {("zh", "LATIN"): 1}
    names = [rec.name for rec in store]
    assert "Zhongguo" not in names


def test_ingest_skips_malformed_lines_with_counter():
    docs = ["{broken", _doc(1, [{"name": "Paris", "lang": "fr"}])]
    store, report = ingest(docs)
    assert report.malformed_lines == 1
    assert len(store) == 1


def test_ingest_schema_violation_aborts():
    with pytest.raises(ValueError, match="schema violation"):
        list(ingest(['{"namespace": "gn", "toponyms": []}']))


def test_ingest_derives_script():
    store, _ = ingest([_doc(3, [{"name": "Киев", "lang": "ru"}])])
    assert store[0].script is ScriptId.CYRILLIC


def test_store_roundtrip(tmp_path, tiny_store):
    path = tmp_path / "toponyms.tsv"
    tiny_store.save(path)
    loaded = ToponymStore.load(path)
    assert len(loaded) == len(tiny_store)
    assert loaded[17] == tiny_store[17]
    assert loaded.place_map == tiny_store.place_map


# -- pair generation ----------------------------------------------------------

def test_orthographic_twins_pass_with_similarity_one():
    docs = [_doc(1, [{"name": "Paris", "lang": "en"},
                     {"name": "Paris", "lang": "fr"}])]
    store, _ = ingest(docs)
    pairs, _ = gen_pairs(store, QuotaTable(same_rate=1.0), seed=1)
    assert len(pairs) == 1
    assert pairs[0].similarity == 1.0


def test_low_similarity_pairs_rejected():
    docs = [_doc(1, [{"name": "Finland", "lang": "en"},
                     {"name": "Suomi", "lang": "fi"}])]
    store, _ = ingest(docs)
    pairs, stats = gen_pairs(store, QuotaTable(), seed=1)
    assert not pairs
    assert stats.rejected_threshold == 1


def test_same_script_pairs_need_higher_threshold():
    # 0.57 passes the cross-script test but not the same-script one
    docs = [_doc(1, [{"name": "London", "lang": "en"},
                     {"name": "Londres", "lang": "fr"},
                     {"name": "Лондон", "lang": "ru"}])]
    store, _ = ingest(docs)
    pairs, _ = gen_pairs(store, QuotaTable(same_rate=1.0), seed=1)
    kept = {(store[p.anchor_id].name, store[p.positive_id].name)
            for p in pairs}
    assert ("London", "Londres") not in kept        # 0.57 < 0.60
    assert ("London", "Лондон") in kept             # 1.00 >= 0.35
    assert ("Londres", "Лондон") in kept            # 0.71 >= 0.35


def test_duplicate_name_lang_pairs_emitted_once():
    # same (name, lang) combination arriving from two authorities
    docs = [
        _doc(1, [{"name": "London", "lang": "en"},
                 {"name": "Лондон", "lang": "ru"}], "gn"),
        _doc(2, [{"name": "London", "lang": "en"},
                 {"name": "Лондон", "lang": "ru"}], "wd"),
    ]
    store, _ = ingest(docs)
    pairs, stats = gen_pairs(store, QuotaTable(same_rate=1.0), seed=1)
    assert len(pairs) == 1
    assert stats.rejected_duplicate == 1


def test_quota_caps_per_script_pair():
    docs = [_doc(i, [{"name": f"Mana{i}x", "lang": "en"},
                     {"name": f"Mana{i}y", "lang": "fr"}])
            for i in range(30)]
    store, _ = ingest(docs)
    pairs, stats = gen_pairs(store, QuotaTable(n_per_pair=5, same_rate=1.0),
                             seed=1)
    assert len(pairs) == 5
    assert stats.rejected_quota > 0


def test_same_script_sampling_rate():
    docs = [_doc(i, [{"name": f"Boro{i}na", "lang": "en"},
                     {"name": f"Boro{i}ne", "lang": "fr"}])
            for i in range(4000)]
    store, _ = ingest(docs)
    pairs, _ = gen_pairs(store, QuotaTable(n_per_pair=10**9), seed=3)
    rate = len(pairs) / 4000
    assert abs(rate - 0.2) < 0.02


def test_cross_script_acceptance_ratio_three_to_one_near_exhaustion():
    # one same-script and one cross-script candidate per place; tight quota
    # keeps both classes in the low-budget regime for most of the scan
    docs = []
    for i in range(30000):
        docs.append(_doc(i, [
            {"name": f"Lado{i}ma", "lang": "en"},
            {"name": f"Lado{i}mo", "lang": "fr"},
        ]))
        docs.append(_doc(100000 + i, [
            {"name": f"Beto{i}la", "lang": "en"},
            {"name": "Бето" + str(i) + "ла", "lang": "ru"},
        ]))
    store, _ = ingest(docs)
    quotas = QuotaTable(n_per_pair=40000, low_budget_frac=1.1)  # always low
    _, stats = gen_pairs(store, quotas, seed=5)
    assert stats.low_offered_cross >= 10_000
    assert stats.low_offered_same >= 10_000
    cross_rate = stats.low_accepted_cross / stats.low_offered_cross
    same_rate = stats.low_accepted_same / stats.low_offered_same
    ratio = cross_rate / same_rate
    assert abs(ratio - 3.0) <= 0.3  # 3:1 within 10%


def test_pair_file_roundtrip_and_sorted(tmp_path, tiny_store):
    pairs, _ = gen_pairs(tiny_store, QuotaTable(), seed=2)
    path = tmp_path / "pairs.tsv"
    save_pairs(pairs, path, "cafe", 2)
    loaded = load_pairs(path)
    assert sorted(loaded, key=lambda p: (p.anchor_id, p.positive_id)) == loaded
    assert {(p.anchor_id, p.positive_id) for p in loaded} == \
        {(p.anchor_id, p.positive_id) for p in pairs}
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header.startswith("# phonotope-pairs v1")
    assert "seed=2" in header and "config=cafe" in header


# -- adjacency / prefix index ---------------------------------------------------

def test_adjacency_complete_graph_per_place():
    docs = [_doc(1, [{"name": "A", "lang": "en"}, {"name": "B", "lang": "fr"},
                     {"name": "C", "lang": "de"}]),
            _doc(2, [{"name": "D", "lang": "en"}])]
    store, _ = ingest(docs)
    adj = build_adjacency(store)
    assert len(adj) == 3
    assert (0, 1) in adj and (1, 2) in adj and (0, 2) in adj
    assert (2, 1) in adj  # symmetric
    assert (0, 3) not in adj


def test_prefix_index_keys():
    docs = [_doc(1, [{"name": "Munich", "lang": "en"},
                     {"name": "Москва", "lang": "ru"},
                     {"name": "O", "lang": "en"}])]
    store, _ = ingest(docs)
    index = build_prefix_index(store)
    assert store[0].id in index.bucket(("mu", ScriptId.LATIN))
    assert store[1].id in index.bucket(("mo", ScriptId.CYRILLIC))
    assert store[2].id in index.bucket(("o_", ScriptId.LATIN))


def test_every_toponym_retrievable_by_own_prefix(tiny_store):
    index = build_prefix_index(tiny_store)
    for rec in tiny_store:
        key = prefix_key(rec, romanise(rec.name))
        assert key is not None
        assert rec.id in index.bucket(key)


# -- triplets -------------------------------------------------------------------

@pytest.fixture(scope="module")
def triplet_world():
    # Munich anchors a cross-script pair; its prefix bucket also holds the
    # co-located München (excluded by adjacency) and Murcia (valid negative)
    docs = [
        _doc(1, [{"name": "Munich", "lang": "en"},
                 {"name": "München", "lang": "de"},
                 {"name": "Мюнхен", "lang": "ru"}]),
        _doc(2, [{"name": "Murcia", "lang": "es"}]),
        _doc(3, [{"name": "Qqqq", "lang": "en"}]),
    ]
    store, _ = ingest(docs)
    pairs, _ = gen_pairs(store, QuotaTable(same_rate=1.0), seed=1)
    adjacency = build_adjacency(store)
    prefix_index = build_prefix_index(store)
    return store, pairs, adjacency, prefix_index


def test_hard_negative_shares_prefix_and_avoids_adjacency(triplet_world):
    store, pairs, adjacency, prefix_index = triplet_world
    munich_pairs = [p for p in pairs if store[p.anchor_id].name == "Munich"]
    assert munich_pairs
    triplets, _ = gen_triplets(munich_pairs, store, "hard", adjacency,
                               prefix_index, seed=4)
    # brute-force enumeration of the (mu, LATIN) bucket leaves only Murcia
    assert len(triplets) == 1
    assert store[triplets[0].negative_id].name == "Murcia"


def test_random_negative_rejects_adjacent(triplet_world):
    store, pairs, adjacency, _ = triplet_world
    for seed in range(10):
        triplets, _ = gen_triplets(pairs, store, "random", adjacency,
                                   None, seed=seed)
        for t in triplets:
            assert (t.anchor_id, t.negative_id) not in adjacency
            assert t.negative_id not in (t.anchor_id, t.positive_id)


def test_empty_bucket_skips_pair():
    docs = [_doc(1, [{"name": "Ab", "lang": "en"},
                     {"name": "Ab", "lang": "fr"}])]
    store, _ = ingest(docs)
    pairs, _ = gen_pairs(store, QuotaTable(same_rate=1.0), seed=1)
    adjacency = build_adjacency(store)
    prefix_index = build_prefix_index(store)
    triplets, stats = gen_triplets(pairs, store, "hard", adjacency,
                                   prefix_index, seed=1)
    assert not triplets
    assert stats.skipped_pairs == 1


def test_empty_pool_raises():
    store = ToponymStore()
    with pytest.raises(ValueError, match="empty toponym pool"):
        gen_triplets([], store, "random", AdjacencySet(), None, seed=1)


def test_triplet_file_roundtrip(tmp_path, tiny_store):
    pairs, _ = gen_pairs(tiny_store, QuotaTable(), seed=2)
    adjacency = build_adjacency(tiny_store)
    triplets, _ = gen_triplets(pairs, tiny_store, "random", adjacency,
                               None, seed=2)
    path = tmp_path / "triplets.tsv"
    save_triplets(triplets, path, "beef", 2)
    loaded = load_triplets(path)
    assert len(loaded) == len(triplets)
    assert all(t.kind == "random" for t in loaded)


def test_gen_pairs_deterministic(tiny_store):
    a, _ = gen_pairs(tiny_store, QuotaTable(), seed=9)
    b, _ = gen_pairs(tiny_store, QuotaTable(), seed=9)
    assert a == b
