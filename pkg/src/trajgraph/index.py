"""Offline construction of the two-layer graph index and its file format.

The upper layer (GARI) links one representative trajectory per non-empty
grid cell to its most similar, some random and its least similar peers.
The lower layer (CNDI) links every trajectory to ``xi`` neighbours: the
best-scoring of its spatially nearest trajectories plus the best-scoring of
a random sample of the rest. Pair scores come from :func:`dtsm_score`.
Edges are directed.

File layout (little-endian)::

    magic        8s   b"TRJGRIDX"
    version      u32
    total_len    u64  byte length of the whole file
    config_len   u32, config JSON (utf-8, sorted keys)
    store_digest 32s  sha256 of the store the index was built over
    grid         4 x f64 bounds, u32 m
    n_nodes      u32, then per node: u16 len + utf-8 id
    n_gari       u32, then n_gari x u32 node number
    gari adj     per GARI node: u32 degree, degree x (u32 node, u8 tag)
    cndi adj     per node:      u32 degree, degree x (u32 node, u8 tag)
    crc32        u32  over every preceding byte
"""

from __future__ import annotations

import json
import logging
import struct
import time
import zlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import _kernels as K
from .errors import IndexChecksumError, IndexFormatError, IndexTruncatedError, IndexVersionError
from .model import Config, TrajectoryStore
from .spatial import Grid, Mbr, RTree, cell_representative, compute_mbr, dataset_bounds

logger = logging.getLogger(__name__)

MAGIC = b"TRJGRIDX"
FORMAT_VERSION = 1

TAGS = ("similar", "random", "dissimilar")
_TAG_CODE = {t: i for i, t in enumerate(TAGS)}

_SEED_GARI = 0x6A41
_SEED_CNDI = 0xC4D1

Adjacency = Dict[str, List[Tuple[str, str]]]


@dataclass
class GariGraph:
    nodes: List[str]
    adj: Adjacency

    def neighbors(self, node) -> List[str]:
        return [n for n, _ in self.adj[node]]


@dataclass
class CndiGraph:
    nodes: List[str]
    adj: Adjacency

    def neighbors(self, node) -> List[str]:
        return [n for n, _ in self.adj[node]]


@dataclass
class IndexBundle:
    gari: GariGraph
    cndi: CndiGraph
    grid: Grid
    config: Config
    store_digest: str
    version: int = FORMAT_VERSION
    timings: dict = field(default_factory=dict, compare=False)


def _rank(ids: List[str], phi: Dict[str, int]) -> List[str]:
    return sorted(ids, key=lambda t: (-phi[t], t))


def _phi_row(store: TrajectoryStore, i: int, others: List[int], config: Config) -> np.ndarray:
    idx = np.asarray(others, dtype=np.int64)
    if len(idx) == 0:
        return np.zeros(0, dtype=np.int64)
    return K.dtsm_many(store.coords, store.offsets, i, idx, float(config.alpha),
                       K.DIST_CODES[config.distance])


def tertiles(n: int) -> Tuple[int, int, int]:
    """Sizes of the (top, middle, bottom) thirds of ``n`` ranked peers.

    The first leftover goes to the top third, the second to the bottom one,
    so that two peers split into one best and one worst.
    """
    base, rem = divmod(n, 3)
    return base + (rem >= 1), base, base + (rem >= 2)


def select_representatives(store: TrajectoryStore, rtree: RTree, grid: Grid) -> List[str]:
    reps = []
    for cell in grid.cells():
        rep = cell_representative(grid, rtree, cell)
        if rep is not None:
            reps.append(rep)
    return reps


def build_gari(store: TrajectoryStore, config: Config, rtree: Optional[RTree] = None,
               grid: Optional[Grid] = None) -> GariGraph:
    if len(store) == 0:
        raise ValueError("cannot build an index over an empty store")
    rtree = rtree or RTree.from_store(store)
    grid = grid or Grid(dataset_bounds(store), config.grid_m)
    reps = select_representatives(store, rtree, grid)
    pos = [store.index_of(r) for r in reps]
    n_sim, n_rand, n_dis = config.gari_neighbor_counts
    adj: Adjacency = {}
    for a, ra in enumerate(reps):
        others = [r for r in reps if r != ra]
        scores = _phi_row(store, pos[a], [p for p, r in zip(pos, reps) if r != ra], config)
        phi = dict(zip(others, scores.tolist()))
        ranked = _rank(others, phi)
        top, mid, _bot = tertiles(len(ranked))
        d_a = ranked[:top]
        d_b = ranked[top:top + mid]
        d_c = ranked[top + mid:]
        rng = np.random.default_rng([config.seed, _SEED_GARI, a])
        picks = sorted(rng.choice(len(d_b), size=min(n_rand, len(d_b)), replace=False).tolist())
        edges = [(t, "similar") for t in d_a[:n_sim]]
        edges += [(d_b[p], "random") for p in picks]
        edges += [(t, "dissimilar") for t in d_c[::-1][:n_dis]]
        adj[ra] = edges
    return GariGraph(reps, adj)


def build_cndi(store: TrajectoryStore, rtree: RTree, config: Config) -> CndiGraph:
    n = len(store)
    if n < 2:
        raise ValueError("the lower graph layer needs at least 2 trajectories")
    if config.xi > n - 1:
        logger.warning("xi=%d exceeds N-1=%d; clamping", config.xi, n - 1)
    n_sim, n_rand = config.neighbor_split(n)
    kn, kr = config.candidate_counts
    adj: Adjacency = {}
    for i, tid in enumerate(store.ids):
        mbr = compute_mbr(store.at(i))
        near = rtree.nearest(mbr.center, kn, exclude=tid) if kn > 0 else []
        near_pos = [store.index_of(t) for t in near]
        mask = np.ones(n, dtype=bool)
        mask[i] = False
        mask[near_pos] = False
        pool = np.flatnonzero(mask)
        rng = np.random.default_rng([config.seed, _SEED_CNDI, i])
        rand_pos = rng.choice(pool, size=min(kr, len(pool)), replace=False) if kr > 0 else pool[:0]
        rand = [store.ids[p] for p in rand_pos.tolist()]
        scores = _phi_row(store, i, near_pos + rand_pos.tolist(), config).tolist()
        phi = dict(zip(near + rand, scores))
        ranked_n = _rank(near, phi)
        # phi ties among random candidates keep their draw order, not id order
        ranked_r = [t for _, _, t in sorted((-phi[t], o, t) for o, t in enumerate(rand))]

        used = set()
        sim_sel = ranked_n[:n_sim]
        rand_sel = ranked_r[:n_rand]
        used.update(sim_sel, rand_sel)
        if len(sim_sel) < n_sim or len(rand_sel) < n_rand:
            fallback = ranked_n + ranked_r + rtree.nearest(mbr.center, n, exclude=tid)
            for slot in (sim_sel, rand_sel):
                quota = n_sim if slot is sim_sel else n_rand
                for t in fallback:
                    if len(slot) >= quota:
                        break
                    if t not in used:
                        slot.append(t)
                        used.add(t)
        adj[tid] = [(t, "similar") for t in sim_sel] + [(t, "random") for t in rand_sel]
    return CndiGraph(list(store.ids), adj)


def build_index(store: TrajectoryStore, config: Config) -> IndexBundle:
    t0 = time.perf_counter()
    rtree = RTree.from_store(store)
    grid = Grid(dataset_bounds(store), config.grid_m)
    t1 = time.perf_counter()
    gari = build_gari(store, config, rtree, grid)
    t2 = time.perf_counter()
    cndi = build_cndi(store, rtree, config)
    t3 = time.perf_counter()
    timings = {"grid_s": t1 - t0, "gari_s": t2 - t1, "cndi_s": t3 - t2}
    return IndexBundle(gari, cndi, grid, config, store.digest(), FORMAT_VERSION, timings)


# --- serialization ------------------------------------------------------------

def _config_json(config: Config) -> bytes:
    return json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":")).encode("utf-8")


def dumps_index(bundle: IndexBundle) -> bytes:
    nodes = bundle.cndi.nodes
    num = {t: i for i, t in enumerate(nodes)}
    body = bytearray()
    cfg = _config_json(bundle.config)
    body += struct.pack("<I", len(cfg)) + cfg
    body += bytes.fromhex(bundle.store_digest)
    b = bundle.grid.bounds
    body += struct.pack("<ddddI", b.x_min, b.y_min, b.x_max, b.y_max, bundle.grid.m)
    body += struct.pack("<I", len(nodes))
    for t in nodes:
        raw = t.encode("utf-8")
        body += struct.pack("<H", len(raw)) + raw
    body += struct.pack("<I", len(bundle.gari.nodes))
    for t in bundle.gari.nodes:
        body += struct.pack("<I", num[t])

    def adj_block(graph_nodes, adj):
        out = bytearray()
        for t in graph_nodes:
            edges = adj[t]
            out += struct.pack("<I", len(edges))
            for nb, tag in edges:
                out += struct.pack("<IB", num[nb], _TAG_CODE[tag])
        return out

    body += adj_block(bundle.gari.nodes, bundle.gari.adj)
    body += adj_block(nodes, bundle.cndi.adj)
    total = len(MAGIC) + 4 + 8 + len(body) + 4
    head = MAGIC + struct.pack("<IQ", bundle.version, total)
    data = bytes(head + body)
    return data + struct.pack("<I", zlib.crc32(data))


class _Reader:
    def __init__(self, buf, pos):
        self.buf = buf
        self.pos = pos

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise IndexTruncatedError("index file ends mid-record")
        vals = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return vals

    def raw(self, n):
        if self.pos + n > len(self.buf):
            raise IndexTruncatedError("index file ends mid-record")
        out = bytes(self.buf[self.pos:self.pos + n])
        self.pos += n
        return out


def loads_index(data: bytes) -> IndexBundle:
    head = len(MAGIC) + 12
    if len(data) < head + 4:
        raise IndexTruncatedError("index file shorter than its header")
    if data[:len(MAGIC)] != MAGIC:
        raise IndexFormatError("not an index file (bad magic)")
    version, total = struct.unpack_from("<IQ", data, len(MAGIC))
    if version != FORMAT_VERSION:
        raise IndexVersionError(f"index format version {version}, expected {FORMAT_VERSION}")
    if len(data) < total:
        raise IndexTruncatedError(f"index file has {len(data)} bytes, header declares {total}")
    if len(data) > total:
        raise IndexFormatError("trailing bytes after index checksum")
    (crc,) = struct.unpack_from("<I", data, total - 4)
    if zlib.crc32(data[:total - 4]) != crc:
        raise IndexChecksumError("index checksum mismatch")
    body = data[:total - 4]
    r = _Reader(body, head)
    (clen,) = r.take("<I")
    try:
        config = Config.from_dict(json.loads(r.raw(clen).decode("utf-8")))
    except (ValueError, TypeError) as exc:
        raise IndexFormatError(f"bad config snapshot: {exc}") from None
    digest = r.raw(32).hex()
    x0, y0, x1, y1, m = r.take("<ddddI")
    grid = Grid(Mbr(x0, y0, x1, y1), m)
    (n,) = r.take("<I")
    nodes = []
    for _ in range(n):
        (ln,) = r.take("<H")
        nodes.append(r.raw(ln).decode("utf-8"))
    (g,) = r.take("<I")
    gari_nodes = [nodes[r.take("<I")[0]] for _ in range(g)]

    def adj_block(graph_nodes):
        adj = {}
        for t in graph_nodes:
            (deg,) = r.take("<I")
            edges = []
            for _ in range(deg):
                j, tag = r.take("<IB")
                if j >= n or tag >= len(TAGS):
                    raise IndexFormatError("adjacency entry out of range")
                edges.append((nodes[j], TAGS[tag]))
            adj[t] = edges
        return adj

    gari = GariGraph(gari_nodes, adj_block(gari_nodes))
    cndi = CndiGraph(nodes, adj_block(nodes))
    if r.pos != len(body):
        raise IndexFormatError("unparsed bytes in index body")
    return IndexBundle(gari, cndi, grid, config, digest, version)


def save_index(bundle: IndexBundle, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_index(bundle))


def load_index(path) -> IndexBundle:
    with open(path, "rb") as fh:
        return loads_index(fh.read())
