"""Online top-k search over the two-layer index.

A query climbs the upper graph from a seeded random entry to a local
maximum of representative similarity, continues climbing the lower graph
from there, then returns the best ``k`` of every trajectory it scored along
the way. When fewer than ``config.candidate_floor`` trajectories were
scored, the lower graph is expanded breadth-first from the final node until
the floor is met.
"""

from __future__ import annotations

import time
import zlib
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .errors import StateError
from .index import IndexBundle
from .model import Config, SubtrajRef, Trajectory, TrajectoryStore
from .similarity import RepScore, rep_similarity_batch

_SEED_QUERY = 0x5EA7


@dataclass
class SearchRecord:
    visited: Dict[str, RepScore] = field(default_factory=dict)
    hops_gari: int = 0
    hops_cndi: int = 0
    wall_times: Dict[str, float] = field(default_factory=dict)
    entry: Optional[str] = None
    gari_end: Optional[str] = None
    cndi_end: Optional[str] = None

    def ensure_scored(self, query, store, traj_ids, config) -> None:
        todo = [t for t in dict.fromkeys(traj_ids) if t not in self.visited]
        if todo:
            for t, rs in zip(todo, rep_similarity_batch(query, store, todo, config)):
                self.visited[t] = rs

    def score(self, traj_id) -> float:
        return self.visited[traj_id].score


@dataclass
class QueryResult:
    topk: List[SubtrajRef]
    record: SearchRecord

    @property
    def ids(self) -> List[str]:
        return [r.traj_id for r in self.topk]


def _neighbors(graph, node) -> List[str]:
    adj = graph.adj if hasattr(graph, "adj") else graph
    return [e[0] if isinstance(e, tuple) else e for e in adj[node]]


def climb(graph, start: str, query, store: TrajectoryStore, config: Config,
          record: SearchRecord, layer: str = "cndi") -> str:
    """Greedy ascent from ``start``; returns the local maximum reached.

    Moves to the best-scoring out-neighbour (ties by id) only when its score
    strictly exceeds the current node's. Scores are cached in ``record``.
    ``graph`` is a graph object or a plain ``{node: [neighbour, ...]}`` map;
    moves are counted into ``record.hops_<layer>``.
    """
    adj = graph.adj if hasattr(graph, "adj") else graph
    if start not in adj:
        raise ValueError(f"start node {start!r} is not in the graph")
    record.ensure_scored(query, store, [start], config)
    cur = start
    while True:
        nbrs = _neighbors(adj, cur)
        if not nbrs:
            break
        record.ensure_scored(query, store, nbrs, config)
        best = min(nbrs, key=lambda t: (-record.score(t), t))
        if record.score(best) > record.score(cur):
            cur = best
            setattr(record, f"hops_{layer}", getattr(record, f"hops_{layer}") + 1)
        else:
            break
    return cur


def _rank_records(visited: Mapping[str, RepScore], ids) -> List[str]:
    return sorted(ids, key=lambda t: (-visited[t].score, t))


def _as_result(record: SearchRecord, ids, k: int) -> QueryResult:
    ranked = _rank_records(record.visited, ids)[:k]
    topk = [record.visited[t].best for t in ranked]
    return QueryResult(topk, record)


def query_rng(query, config: Config) -> np.random.Generator:
    qid = getattr(query, "id", "")
    return np.random.default_rng([config.seed, _SEED_QUERY, zlib.crc32(str(qid).encode("utf-8"))])


def query_topk(query: Trajectory, index: IndexBundle, store: TrajectoryStore,
               config: Optional[Config] = None) -> QueryResult:
    config = config or index.config
    n = len(store)
    if n == 0 or not index.cndi.nodes:
        raise StateError("query against an empty index")
    if config.k > n:
        raise ValueError(f"k={config.k} exceeds the number of trajectories ({n})")
    rng = query_rng(query, config)
    record = SearchRecord()
    t0 = time.perf_counter()

    if config.use_gari and index.gari.nodes:
        entry = index.gari.nodes[int(rng.integers(len(index.gari.nodes)))]
        record.entry = entry
        top = climb(index.gari, entry, query, store, config, record, "gari")
    else:
        top = index.cndi.nodes[int(rng.integers(len(index.cndi.nodes)))]
        record.entry = top
    record.gari_end = top
    t1 = time.perf_counter()

    final = climb(index.cndi, top, query, store, config, record, "cndi")
    record.cndi_end = final
    neighborhood = [final] + index.cndi.neighbors(final)
    record.ensure_scored(query, store, neighborhood, config)

    if config.record_tracking:
        floor = min(config.candidate_floor, n)
        if len(record.visited) < floor:
            seen = {final}
            queue = deque([final])
            while queue and len(record.visited) < floor:
                node = queue.popleft()
                nbrs = index.cndi.neighbors(node)
                record.ensure_scored(query, store, nbrs, config)
                for t in nbrs:
                    if t not in seen:
                        seen.add(t)
                        queue.append(t)
        candidates = list(record.visited)
    else:
        candidates = list(dict.fromkeys(neighborhood))
    t2 = time.perf_counter()
    record.wall_times = {"gari_s": t1 - t0, "cndi_s": t2 - t1, "total_s": t2 - t0}
    return _as_result(record, candidates, config.k)


def exhaustive_topk(query: Trajectory, store: TrajectoryStore, config: Config) -> QueryResult:
    """Ground truth: score every trajectory, keep the best ``k``."""
    if config.k > len(store):
        raise ValueError(f"k={config.k} exceeds the number of trajectories ({len(store)})")
    record = SearchRecord()
    t0 = time.perf_counter()
    record.ensure_scored(query, store, store.ids, config)
    record.wall_times = {"total_s": time.perf_counter() - t0}
    return _as_result(record, store.ids, config.k)


def full_ranking(result: QueryResult) -> List[str]:
    """All scored ids ordered by (score desc, id asc)."""
    return _rank_records(result.record.visited, result.record.visited.keys())
