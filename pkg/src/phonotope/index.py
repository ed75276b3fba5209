"""Persistent embedding store with exact and approximate cosine retrieval.

The exact index is a flat scan (float64 scoring, deterministic id
tie-break) and doubles as the oracle for the approximate path. The
approximate index is a hierarchical navigable small-world graph over the
unit vectors with cosine distance; neighbour degree and construction and
search breadth are configurable. The graph kernels are numba-compiled:
construction is a sequential insert loop and pure Python is an order of
magnitude too slow for six-figure stores.

Both modes share one versioned binary container, so a save/load round
trip is query-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

_EMB_MAGIC = b"PHONOEMB v1\n"
_IDX_MAGIC = b"PHONOIDX v1\n"

EMBED_DIM = 128
NORM_TOLERANCE = 1e-3


class EmbeddingStore:
    """Toponym id -> unit-norm embedding, with provenance metadata."""

    def __init__(self, ids: np.ndarray, vectors: np.ndarray,
                 metadata: dict | None = None):
        ids = np.asarray(ids, dtype=np.int64)
        vectors = np.asarray(vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise ValueError("vectors must be 2-D")
        if len(ids) != len(vectors):
            raise ValueError("ids/vectors length mismatch")
        if len(np.unique(ids)) != len(ids):
            raise ValueError("duplicate ids in embedding store")
        norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
        if len(vectors) and np.abs(norms - 1.0).max() > NORM_TOLERANCE:
            worst = int(np.abs(norms - 1.0).argmax())
            raise ValueError(
                f"non-unit vector for id {int(ids[worst])} "
                f"(norm {norms[worst]:.6f})")
        self.ids = ids
        self.vectors = vectors
        self.metadata = dict(metadata or {})

    def __len__(self) -> int:
        return len(self.ids)

    def save(self, path: str | Path) -> None:
        header = {"count": len(self.ids), "dim": int(self.vectors.shape[1]),
                  "metadata": self.metadata}
        with open(path, "wb") as fh:
            fh.write(_EMB_MAGIC)
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            records = np.zeros(
                len(self.ids),
                dtype=[("id", "<i8"), ("vec", "<f4", self.vectors.shape[1])])
            records["id"] = self.ids
            records["vec"] = self.vectors
            fh.write(records.tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingStore":
        with open(path, "rb") as fh:
            magic = fh.read(len(_EMB_MAGIC))
            if magic != _EMB_MAGIC:
                raise ValueError(f"not a phonotope embedding file: {path}")
            header = json.loads(fh.readline().decode())
            count, dim = header["count"], header["dim"]
            dtype = np.dtype([("id", "<i8"), ("vec", "<f4", dim)])
            raw = fh.read(count * dtype.itemsize)
            if len(raw) != count * dtype.itemsize:
                raise ValueError(f"truncated embedding file: {path}")
            records = np.frombuffer(raw, dtype=dtype)
        return cls(records["id"].copy(), records["vec"].copy(),
                   header.get("metadata"))


@dataclass
class QueryResult:
    """Ranked (toponym id, cosine score), scores non-increasing."""

    hits: list[tuple[int, float]] = field(default_factory=list)

    def ids(self) -> list[int]:
        return [i for i, _ in self.hits]


@dataclass
class HnswParams:
    m: int = 16                  # neighbour degree (level > 0); 2m at level 0
    ef_construction: int = 100
    ef_search: int = 128
    seed: int = 7


# ---------------------------------------------------------------------------
# Compiled graph kernels. The per-level graph is a fixed-capacity int32
# adjacency matrix plus a degree vector; visited bookkeeping uses a
# generation counter so no per-query clearing is needed.

@njit(cache=True)
def _dist(vectors, node, query):
    acc = 0.0
    for d in range(query.shape[0]):
        acc += vectors[node, d] * query[d]
    return 1.0 - acc


@njit(cache=True)
def _heap_push(heap_d, heap_i, size, d, i):
    # min-heap on d
    pos = size
    heap_d[pos] = d
    heap_i[pos] = i
    while pos > 0:
        parent = (pos - 1) // 2
        if heap_d[parent] <= heap_d[pos]:
            break
        heap_d[parent], heap_d[pos] = heap_d[pos], heap_d[parent]
        heap_i[parent], heap_i[pos] = heap_i[pos], heap_i[parent]
        pos = parent
    return size + 1


@njit(cache=True)
def _heap_pop(heap_d, heap_i, size):
    top_d, top_i = heap_d[0], heap_i[0]
    size -= 1
    heap_d[0], heap_i[0] = heap_d[size], heap_i[size]
    pos = 0
    while True:
        left = 2 * pos + 1
        if left >= size:
            break
        child = left
        right = left + 1
        if right < size and heap_d[right] < heap_d[left]:
            child = right
        if heap_d[pos] <= heap_d[child]:
            break
        heap_d[pos], heap_d[child] = heap_d[child], heap_d[pos]
        heap_i[pos], heap_i[child] = heap_i[child], heap_i[pos]
        pos = child
    return top_d, top_i, size


@njit(cache=True)
def _greedy_descent(vectors, adj, deg, ep, dist_ep, query):
    improved = True
    while improved:
        improved = False
        best_node = ep
        best_dist = dist_ep
        for slot in range(deg[ep]):
            cand = adj[ep, slot]
            d = _dist(vectors, cand, query)
            if d < best_dist:
                best_node = cand
                best_dist = d
        if best_dist < dist_ep:
            ep = best_node
            dist_ep = best_dist
            improved = True
    return ep, dist_ep


@njit(cache=True)
def _search_layer(vectors, adj, deg, ep, dist_ep, query, ef,
                  visited, gen, out_d, out_i):
    """Beam search on one level; returns number of results in out_*.

    Results are the ef closest discovered nodes, unsorted.
    """
    cap = out_d.shape[0] * 16 + 256
    cand_d = np.empty(cap, dtype=np.float32)
    cand_i = np.empty(cap, dtype=np.int32)
    best_d = np.empty(ef, dtype=np.float32)   # max-heap via negation
    best_i = np.empty(ef, dtype=np.int32)
    cand_size = 0
    best_size = 0
    visited[ep] = gen
    cand_size = _heap_push(cand_d, cand_i, cand_size, dist_ep, ep)
    best_size = _heap_push(best_d, best_i, best_size, -dist_ep, ep)
    while cand_size > 0:
        d, node, cand_size = _heap_pop(cand_d, cand_i, cand_size)
        if best_size >= ef and d > -best_d[0]:
            break
        for slot in range(deg[node]):
            neigh = adj[node, slot]
            if visited[neigh] == gen:
                continue
            visited[neigh] = gen
            nd = _dist(vectors, neigh, query)
            admit = False
            if best_size < ef:
                best_size = _heap_push(best_d, best_i, best_size, -nd, neigh)
                admit = True
            elif nd < -best_d[0]:
                # replace current worst
                _, _, best_size = _heap_pop(best_d, best_i, best_size)
                best_size = _heap_push(best_d, best_i, best_size, -nd, neigh)
                admit = True
            if admit:
                if cand_size >= cap:
                    # compact: drop pending candidates beyond the bound,
                    # which the main loop would never expand anyway
                    bound = -best_d[0]
                    kept = 0
                    for t in range(cand_size):
                        if cand_d[t] < bound:
                            cand_d[kept] = cand_d[t]
                            cand_i[kept] = cand_i[t]
                            kept += 1
                    # re-heapify survivors (sift-down from mid)
                    cand_size = kept
                    for t in range(kept // 2 - 1, -1, -1):
                        pos = t
                        while True:
                            left = 2 * pos + 1
                            if left >= kept:
                                break
                            child = left
                            if left + 1 < kept and cand_d[left + 1] < cand_d[left]:
                                child = left + 1
                            if cand_d[pos] <= cand_d[child]:
                                break
                            cand_d[pos], cand_d[child] = cand_d[child], cand_d[pos]
                            cand_i[pos], cand_i[child] = cand_i[child], cand_i[pos]
                            pos = child
                if cand_size < cap:
                    cand_size = _heap_push(cand_d, cand_i, cand_size, nd, neigh)
    for k in range(best_size):
        out_d[k] = -best_d[k]
        out_i[k] = best_i[k]
    return best_size


@njit(cache=True)
def _select_heuristic(vectors, cand_d, cand_i, count, m, out):
    """Diversifying neighbour selection with refill, candidates pre-sorted.

    A candidate is kept when it is closer to the query than to every
    already-kept neighbour; skipped candidates refill up to m.
    """
    kept = 0
    n_skipped = 0
    skipped = np.empty(count, dtype=np.int32)
    for c in range(count):
        if kept >= m:
            break
        node = cand_i[c]
        d_query = cand_d[c]
        diverse = True
        for s in range(kept):
            acc = 0.0
            for dim in range(vectors.shape[1]):
                acc += vectors[node, dim] * vectors[out[s], dim]
            if 1.0 - acc < d_query:
                diverse = False
                break
        if diverse:
            out[kept] = node
            kept += 1
        else:
            skipped[n_skipped] = node
            n_skipped += 1
    for s in range(n_skipped):
        if kept >= m:
            break
        out[kept] = skipped[s]
        kept += 1
    return kept


@njit(cache=True)
def _build_graph(vectors, levels, m, ef_construction,
                 adj_list, deg_list, caps):
    n = vectors.shape[0]
    n_levels = len(adj_list)
    visited = np.zeros(n, dtype=np.int64)
    gen = 0
    entry = 0
    entry_level = levels[0]
    scratch = max(ef_construction, 2 * m) + 1
    out_d = np.empty(scratch, dtype=np.float32)
    out_i = np.empty(scratch, dtype=np.int32)
    sel = np.empty(2 * m, dtype=np.int32)
    sel_shrink = np.empty(2 * m, dtype=np.int32)  # distinct: sel is live
    merged_d = np.empty(2 * m + 1, dtype=np.float32)
    merged_i = np.empty(2 * m + 1, dtype=np.int32)
    for node in range(1, n):
        query = vectors[node]
        node_level = levels[node]
        ep = entry
        dist_ep = _dist(vectors, ep, query)
        level = entry_level
        while level > node_level:
            ep, dist_ep = _greedy_descent(
                vectors, adj_list[level], deg_list[level], ep, dist_ep, query)
            level -= 1
        level = min(node_level, entry_level)
        while level >= 0:
            adj = adj_list[level]
            deg = deg_list[level]
            cap = caps[level]
            gen += 1
            count = _search_layer(vectors, adj, deg, ep, dist_ep, query,
                                  ef_construction, visited, gen, out_d, out_i)
            # sort results ascending by distance (insertion sort, small)
            for a in range(1, count):
                kd, ki = out_d[a], out_i[a]
                b = a - 1
                while b >= 0 and out_d[b] > kd:
                    out_d[b + 1] = out_d[b]
                    out_i[b + 1] = out_i[b]
                    b -= 1
                out_d[b + 1] = kd
                out_i[b + 1] = ki
            kept = _select_heuristic(vectors, out_d, out_i, count, m, sel)
            for s in range(kept):
                adj[node, s] = sel[s]
            deg[node] = kept
            for s in range(kept):
                other = sel[s]
                d_other = deg[other]
                if d_other < cap:
                    adj[other, d_other] = node
                    deg[other] = d_other + 1
                else:
                    # over-full: re-select the cap best among current + node
                    q2 = vectors[other]
                    for t in range(d_other):
                        merged_i[t] = adj[other, t]
                        merged_d[t] = _dist(vectors, adj[other, t], q2)
                    merged_i[d_other] = node
                    merged_d[d_other] = _dist(vectors, node, q2)
                    total = d_other + 1
                    for a in range(1, total):
                        kd, ki = merged_d[a], merged_i[a]
                        b = a - 1
                        while b >= 0 and merged_d[b] > kd:
                            merged_d[b + 1] = merged_d[b]
                            merged_i[b + 1] = merged_i[b]
                            b -= 1
                        merged_d[b + 1] = kd
                        merged_i[b + 1] = ki
                    kept2 = _select_heuristic(vectors, merged_d, merged_i,
                                              total, cap, sel_shrink)
                    for t in range(kept2):
                        adj[other, t] = sel_shrink[t]
                    deg[other] = kept2
            # carry the closest result as entry point for the level below
            best = 0
            for a in range(1, count):
                if out_d[a] < out_d[best]:
                    best = a
            ep = out_i[best]
            dist_ep = out_d[best]
            level -= 1
        if node_level > entry_level:
            entry_level = node_level
            entry = node
    return entry


@njit(cache=True)
def _query_graph(vectors, levels_count, adj_list, deg_list, entry, query,
                 ef, visited, gen, out_d, out_i):
    ep = entry
    dist_ep = _dist(vectors, ep, query)
    for level in range(levels_count - 1, 0, -1):
        ep, dist_ep = _greedy_descent(
            vectors, adj_list[level], deg_list[level], ep, dist_ep, query)
    return _search_layer(vectors, adj_list[0], deg_list[0], ep, dist_ep,
                         query, ef, visited, gen, out_d, out_i)


class Index:
    """Exact or approximate top-k cosine retrieval over a store."""

    def __init__(self, store: EmbeddingStore, mode: str,
                 params: HnswParams | None = None):
        if len(store) == 0:
            raise ValueError("empty embedding store")
        if mode not in ("exact", "hnsw"):
            raise ValueError(f"unknown index mode: {mode}")
        self.store = store
        self.mode = mode
        self.params = params or HnswParams()
        self._adj: list[np.ndarray] = []
        self._deg: list[np.ndarray] = []
        self._levels: np.ndarray | None = None
        self._entry: int = 0
        self._visited: np.ndarray | None = None
        self._gen = 0
        if mode == "hnsw":
            self._construct()

    def _construct(self) -> None:
        n, p = len(self.store), self.params
        rng = np.random.default_rng(p.seed)
        ml = 1.0 / math.log(p.m)
        levels = np.minimum(
            (-np.log(rng.random(n)) * ml).astype(np.int64), 32)
        self._levels = levels
        self._allocate(int(levels.max()) + 1)
        self._entry = int(_build_graph(
            self.store.vectors, levels, p.m, p.ef_construction,
            tuple(self._adj), tuple(self._deg),
            np.array(self._caps, dtype=np.int64)))

    def _allocate(self, n_levels: int) -> None:
        n, m = len(self.store), self.params.m
        self._caps = [2 * m if lvl == 0 else m for lvl in range(n_levels)]
        self._adj = [np.full((n, cap), -1, dtype=np.int32)
                     for cap in self._caps]
        self._deg = [np.zeros(n, dtype=np.int32) for _ in self._caps]
        self._visited = np.zeros(n, dtype=np.int64)

    # -- queries ------------------------------------------------------------

    def query(self, embedding: np.ndarray, k: int) -> QueryResult:
        if k < 1:
            raise ValueError("k must be >= 1")
        q = np.asarray(embedding, dtype=np.float64)
        if self.mode == "exact":
            scores = self.store.vectors.astype(np.float64) @ q
            order = np.lexsort((self.store.ids, -scores))[:k]
            return QueryResult(hits=[(int(self.store.ids[i]), float(scores[i]))
                                     for i in order])
        ef = max(self.params.ef_search, k)
        out_d = np.empty(ef, dtype=np.float32)
        out_i = np.empty(ef, dtype=np.int32)
        self._gen += 1
        count = _query_graph(
            self.store.vectors, len(self._adj), tuple(self._adj),
            tuple(self._deg), self._entry, q.astype(np.float32), ef,
            self._visited, self._gen, out_d, out_i)
        nodes = out_i[:count].astype(np.int64)
        scores = self.store.vectors[nodes].astype(np.float64) @ q
        ids = self.store.ids[nodes]
        order = np.lexsort((ids, -scores))[:k]
        return QueryResult(hits=[(int(ids[i]), float(scores[i]))
                                 for i in order])

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        header = {
            "mode": self.mode,
            "count": len(self.store),
            "dim": int(self.store.vectors.shape[1]),
            "metadata": self.store.metadata,
            "params": {"m": self.params.m,
                       "ef_construction": self.params.ef_construction,
                       "ef_search": self.params.ef_search,
                       "seed": self.params.seed},
            "entry": self._entry,
            "levels": len(self._adj),
        }
        with open(path, "wb") as fh:
            fh.write(_IDX_MAGIC)
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            fh.write(self.store.ids.astype("<i8").tobytes())
            fh.write(self.store.vectors.astype("<f4").tobytes())
            if self.mode == "hnsw":
                fh.write(np.asarray(self._levels, dtype="<i8").tobytes())
                for adj, deg in zip(self._adj, self._deg):
                    fh.write(deg.astype("<i4").tobytes())
                    fh.write(adj.astype("<i4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "Index":
        with open(path, "rb") as fh:
            magic = fh.read(len(_IDX_MAGIC))
            if magic != _IDX_MAGIC:
                raise ValueError(
                    f"not a phonotope index (or wrong version): {path}")
            try:
                header = json.loads(fh.readline().decode())
                count, dim = header["count"], header["dim"]
                mode = header["mode"]
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"corrupted index header: {path}") from exc
            ids = np.frombuffer(fh.read(count * 8), dtype="<i8").copy()
            vectors = np.frombuffer(fh.read(count * dim * 4),
                                    dtype="<f4").reshape(count, dim).copy()
            store = EmbeddingStore(ids, vectors, header.get("metadata"))
            index = cls.__new__(cls)
            index.store = store
            index.mode = mode
            index.params = HnswParams(**header["params"])
            index._adj = []
            index._deg = []
            index._levels = None
            index._entry = header.get("entry", 0)
            index._visited = np.zeros(count, dtype=np.int64)
            index._gen = 0
            if mode == "hnsw":
                index._levels = np.frombuffer(fh.read(count * 8),
                                              dtype="<i8").copy()
                n_levels = header["levels"]
                m = index.params.m
                index._caps = [2 * m if lvl == 0 else m
                               for lvl in range(n_levels)]
                for cap in index._caps:
                    deg = np.frombuffer(fh.read(count * 4), dtype="<i4").copy()
                    adj = np.frombuffer(fh.read(count * cap * 4),
                                        dtype="<i4").reshape(count, cap).copy()
                    index._deg.append(deg)
                    index._adj.append(adj)
        return index


def build(store: EmbeddingStore, mode: str = "exact",
          params: HnswParams | None = None) -> Index:
    return Index(store, mode, params)
