"""Bounding rectangles, a uniform grid over the dataset extent, and an
R-tree over trajectory MBRs.

"Close" between trajectories always means Euclidean distance between MBR
centres. The R-tree is an accelerator only; ``linear_nearest_k`` and
``linear_cell_representative`` compute the same answers by scanning.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .model import Trajectory, TrajectoryStore


@dataclass(frozen=True)
class Mbr:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"degenerate Mbr bounds {self}")

    @property
    def center(self) -> Tuple[float, float]:
        return ((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)

    def union(self, other: "Mbr") -> "Mbr":
        return Mbr(min(self.x_min, other.x_min), min(self.y_min, other.y_min),
                   max(self.x_max, other.x_max), max(self.y_max, other.y_max))

    def intersects(self, other: "Mbr") -> bool:
        return not (self.x_min > other.x_max or other.x_min > self.x_max
                    or self.y_min > other.y_max or other.y_min > self.y_max)

    def contains_point(self, x, y) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def mindist(self, x, y) -> float:
        dx = max(self.x_min - x, 0.0, x - self.x_max)
        dy = max(self.y_min - y, 0.0, y - self.y_max)
        return math.sqrt(dx * dx + dy * dy)

    def as_tuple(self):
        return (self.x_min, self.y_min, self.x_max, self.y_max)


def compute_mbr(t) -> Mbr:
    xy = t.xy if isinstance(t, Trajectory) else np.asarray(t, dtype=np.float64).reshape(-1, 2)
    if len(xy) == 0:
        raise ValueError("cannot bound an empty trajectory")
    lo = xy.min(axis=0)
    hi = xy.max(axis=0)
    return Mbr(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def dataset_bounds(store: TrajectoryStore) -> Mbr:
    if len(store) == 0:
        raise ValueError("dataset_bounds of an empty store")
    lo = store.coords.min(axis=0)
    hi = store.coords.max(axis=0)
    return Mbr(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def center_dist(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return math.sqrt(dx * dx + dy * dy)


class Grid:
    """``m`` x ``m`` uniform partition of ``bounds``.

    Cells are addressed ``(i, j)`` with ``i`` along x. Points on the upper
    edges clamp into the last row/column so every point lands in one cell.
    """

    def __init__(self, bounds: Mbr, m: int):
        if m < 1:
            raise ValueError("grid side count must be >= 1")
        self.bounds = bounds
        self.m = int(m)
        self.cell_w = (bounds.x_max - bounds.x_min) / self.m
        self.cell_h = (bounds.y_max - bounds.y_min) / self.m

    def __eq__(self, other):
        return isinstance(other, Grid) and self.bounds == other.bounds and self.m == other.m

    def __repr__(self):
        return f"Grid(m={self.m}, bounds={self.bounds.as_tuple()})"

    def _axis(self, v, lo, w):
        if w <= 0:
            return 0
        return min(max(int(math.floor((v - lo) / w)), 0), self.m - 1)

    def cell_of(self, x, y) -> Tuple[int, int]:
        return (self._axis(x, self.bounds.x_min, self.cell_w),
                self._axis(y, self.bounds.y_min, self.cell_h))

    def cell_rect(self, cell) -> Mbr:
        i, j = cell
        b = self.bounds
        x0 = b.x_min + i * self.cell_w
        y0 = b.y_min + j * self.cell_h
        x1 = b.x_max if i == self.m - 1 else b.x_min + (i + 1) * self.cell_w
        y1 = b.y_max if j == self.m - 1 else b.y_min + (j + 1) * self.cell_h
        return Mbr(x0, y0, x1, y1)

    def cell_center(self, cell) -> Tuple[float, float]:
        return self.cell_rect(cell).center

    def cells(self):
        return [(i, j) for i in range(self.m) for j in range(self.m)]


# --- R-tree ----------------------------------------------------------------

class _Node:
    __slots__ = ("mbr", "cbox", "children", "entries")

    def __init__(self, children=None, entries=None):
        self.children = children
        self.entries = entries
        if entries is not None:
            rects = [e[0] for e in entries]
            centers = [e[0].center for e in entries]
        else:
            rects = [c.mbr for c in children]
            centers = None
        mbr = rects[0]
        for r in rects[1:]:
            mbr = mbr.union(r)
        self.mbr = mbr
        if centers is not None:
            xs = [c[0] for c in centers]
            ys = [c[1] for c in centers]
            self.cbox = Mbr(min(xs), min(ys), max(xs), max(ys))
        else:
            cb = children[0].cbox
            for c in children[1:]:
                cb = cb.union(c.cbox)
            self.cbox = cb

    @property
    def is_leaf(self):
        return self.entries is not None


class RTree:
    """Static R-tree over ``(Mbr, traj_id)`` entries, packed Sort-Tile-Recursive.

    Each node also keeps the bounding box of its entries' centres so that
    nearest-centre searches can prune whole subtrees.
    """

    def __init__(self, entries: Iterable[Tuple[Mbr, str]], fanout: int = 16):
        if fanout < 2:
            raise ValueError("fanout must be >= 2")
        self.fanout = fanout
        self.entries = list(entries)
        self.root = self._pack(self.entries) if self.entries else None

    @classmethod
    def from_store(cls, store: TrajectoryStore, fanout: int = 16) -> "RTree":
        return cls(((compute_mbr(t), t.id) for t in store), fanout)

    def __len__(self):
        return len(self.entries)

    def _tiles(self, items, key_center):
        n = len(items)
        f = self.fanout
        n_leaves = math.ceil(n / f)
        n_slabs = max(1, math.ceil(math.sqrt(n_leaves)))
        per_slab = n_slabs * f
        items = sorted(items, key=lambda it: (key_center(it)[0], key_center(it)[1]))
        groups = []
        for s in range(0, n, per_slab):
            slab = sorted(items[s:s + per_slab], key=lambda it: (key_center(it)[1], key_center(it)[0]))
            for g in range(0, len(slab), f):
                groups.append(slab[g:g + f])
        return groups

    def _pack(self, entries):
        level = [_Node(entries=g) for g in self._tiles(entries, lambda e: e[0].center)]
        while len(level) > 1:
            level = [_Node(children=g) for g in self._tiles(level, lambda nd: nd.mbr.center)]
        return level[0]

    def range_query(self, rect: Mbr) -> List[str]:
        """Ids whose Mbr intersects ``rect``."""
        out = []
        if self.root is None:
            return out
        stack = [self.root]
        while stack:
            node = stack.pop()
            if not node.mbr.intersects(rect):
                continue
            if node.is_leaf:
                out.extend(tid for r, tid in node.entries if r.intersects(rect))
            else:
                stack.extend(node.children)
        return sorted(out)

    def center_query(self, rect: Mbr) -> List[Tuple[Mbr, str]]:
        """Entries whose Mbr centre lies inside ``rect`` (edges inclusive)."""
        out = []
        if self.root is None:
            return out
        stack = [self.root]
        while stack:
            node = stack.pop()
            if not node.cbox.intersects(rect):
                continue
            if node.is_leaf:
                out.extend(e for e in node.entries if rect.contains_point(*e[0].center))
            else:
                stack.extend(node.children)
        out.sort(key=lambda e: e[1])
        return out

    def nearest(self, point, k: int, exclude: Optional[str] = None) -> List[str]:
        """``k`` ids with the closest Mbr centres to ``point``; ties by id.

        Best-first search. Nodes sort ahead of entries at equal distance, so
        by the time an entry is popped every entry at that distance is queued.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if self.root is None:
            return []
        px, py = point
        counter = itertools.count()
        heap = [(self.root.cbox.mindist(px, py), 0, next(counter), self.root)]
        out = []
        while heap and len(out) < k:
            d, kind, tie, item = heapq.heappop(heap)
            if kind == 1:
                if item != exclude:
                    out.append(item)
                continue
            if item.is_leaf:
                for r, tid in item.entries:
                    heapq.heappush(heap, (center_dist(r.center, (px, py)), 1, tid, tid))
            else:
                for c in item.children:
                    heapq.heappush(heap, (c.cbox.mindist(px, py), 0, next(counter), c))
        return out


def nearest_k(rtree: RTree, probe: Mbr, k: int, exclude: Optional[str] = None) -> List[str]:
    """Ids whose Mbr centres are nearest ``probe``'s centre (``exclude`` skipped)."""
    return rtree.nearest(probe.center, k, exclude)


def linear_nearest_k(entries: Sequence[Tuple[Mbr, str]], probe: Mbr, k: int,
                     exclude: Optional[str] = None) -> List[str]:
    c = probe.center
    ranked = sorted((center_dist(r.center, c), tid) for r, tid in entries if tid != exclude)
    return [tid for _, tid in ranked[:k]]


def cell_representative(grid: Grid, rtree: RTree, cell) -> Optional[str]:
    """Trajectory whose Mbr centre lies in ``cell`` and is nearest its centre."""
    members = [(r, tid) for r, tid in rtree.center_query(grid.cell_rect(cell))
               if grid.cell_of(*r.center) == tuple(cell)]
    if not members:
        return None
    cc = grid.cell_center(cell)
    return min(members, key=lambda e: (center_dist(e[0].center, cc), e[1]))[1]


def linear_cell_representative(grid: Grid, entries, cell) -> Optional[str]:
    cc = grid.cell_center(cell)
    best = None
    for r, tid in entries:
        if grid.cell_of(*r.center) != tuple(cell):
            continue
        key = (center_dist(r.center, cc), tid)
        if best is None or key < best:
            best = key
    return None if best is None else best[1]


def cell_populations(grid: Grid, entries) -> dict:
    pop = {}
    for r, _tid in entries:
        c = grid.cell_of(*r.center)
        pop[c] = pop.get(c, 0) + 1
    return pop
