"""Best point-pair-matching score over all subtrajectory pairs of two
trajectories.

Points of the two trajectories are compared under a threshold ``alpha``
(``+1`` similar, ``-1`` not). Starting from a similar pair, an alignment walks
forward through the match matrix; every newly formed pair is charged once:

* the current pair is similar: move diagonally, charging +2/-2 for the new pair;
* otherwise, if a neighbour pair sharing one point is similar, move onto it
  for +3 (its +2 plus 1 cancelling the unmatched point); both if both are;
* otherwise, if the diagonal pair is similar, move onto it for +2;
* otherwise move one step along either trajectory for -1.

An alignment may stop anywhere, and starting pairs that are not similar are
skipped (they cannot beat the start one step down the diagonal). The
trajectory score is ``2 + V(i, j)`` maximised over similar starts, where
``V`` is the best continuation value (never below 0).

Indices in this module are 0-based; ``DtsmResult.pair`` holds 1-based
:class:`SubtrajRef` values.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np

from . import _kernels as K
from .model import SubtrajRef, Trajectory

State = Tuple[int, int]

MAX_ORACLE_LEN = 12


@dataclass(frozen=True)
class MatchMatrix:
    """``entries[i, j]`` is +1 iff point i of d1 and point j of d2 are within alpha."""

    entries: np.ndarray

    @property
    def shape(self):
        return self.entries.shape

    def similar(self, a, b) -> bool:
        n1, n2 = self.entries.shape
        return 0 <= a < n1 and 0 <= b < n2 and self.entries[a, b] > 0

    def __getitem__(self, ij):
        return int(self.entries[ij])


@dataclass(frozen=True)
class DtsmResult:
    score: int
    pair: Optional[Tuple[SubtrajRef, SubtrajRef]] = None
    path: Optional[Tuple[State, ...]] = None


def _xy(t):
    xy = t.xy if isinstance(t, Trajectory) else np.asarray(t, dtype=np.float64).reshape(-1, 2)
    return np.ascontiguousarray(xy, dtype=np.float64)


def build_match_matrix(d1, d2, alpha: float, distance: str = "euclidean") -> MatchMatrix:
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    return MatchMatrix(K.match_matrix(_xy(d1), _xy(d2), float(alpha), K.DIST_CODES[distance]))


def _as_matrix(A) -> MatchMatrix:
    return A if isinstance(A, MatchMatrix) else MatchMatrix(np.asarray(A, dtype=np.int8))


def step_cost_and_advance(state: State, A, bounds: Optional[State] = None) -> List[Tuple[int, State]]:
    """Applicable ``(cost, next_state)`` choices from an already-charged state.

    ``bounds`` is the last valid (row, col), defaulting to the matrix corner.
    Moves leaving the bounds are omitted; they would contribute nothing.
    """
    A = _as_matrix(A)
    a, b = state
    k, l = bounds if bounds is not None else (A.shape[0] - 1, A.shape[1] - 1)

    def sim(u, v):
        return u <= k and v <= l and A.similar(u, v)

    def inside(u, v):
        return u <= k and v <= l

    if sim(a, b):
        # C1: charge the next diagonal pair
        if inside(a + 1, b + 1):
            return [(2 if sim(a + 1, b + 1) else -2, (a + 1, b + 1))]
        return []
    s12 = sim(a, b + 1)
    s21 = sim(a + 1, b)
    if s12 or s21:
        # C2 / C3 / C4: subcost 2 plus 1 for the cancelled unmatched point
        out = []
        if s12:
            out.append((3, (a, b + 1)))
        if s21:
            out.append((3, (a + 1, b)))
        return out
    if sim(a + 1, b + 1):
        return [(2, (a + 1, b + 1))]  # C5
    # C6: -2 for the dissimilar pair, +1 cancellation
    out = []
    if inside(a, b + 1):
        out.append((-1, (a, b + 1)))
    if inside(a + 1, b):
        out.append((-1, (a + 1, b)))
    return out


def best_continuation(a: int, b: int, A, alpha: float = None) -> int:
    """Best value obtainable by continuing from charged state (a, b), or 0.

    Memoised pure-Python reference; :func:`dtsm` uses a compiled table.
    ``alpha`` is accepted for interface symmetry and unused once A is built.
    """
    A = _as_matrix(A)

    @lru_cache(maxsize=None)
    def V(u, v):
        best = 0
        for cost, nxt in step_cost_and_advance((u, v), A):
            best = max(best, cost + V(*nxt))
        return best

    return V(a, b)


def dtsm(d1, d2, alpha: float, distance: str = "euclidean", with_pair: bool = True) -> DtsmResult:
    """Maximum matching score between subtrajectories of ``d1`` and ``d2``.

    Ties between maximising pairs resolve to the smallest (i, j, k, l).
    """
    x1, x2 = _xy(d1), _xy(d2)
    if len(x1) == 0 or len(x2) == 0:
        raise ValueError("dtsm needs two non-empty trajectories")
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    kind = K.DIST_CODES[distance]
    if not with_pair:
        return DtsmResult(int(K.dtsm_score(x1, x2, float(alpha), kind)))
    sim = K.match_matrix(x1, x2, float(alpha), kind)
    score, i, j, k, l, _V, CH = K.dtsm_best(sim)
    if i < 0:
        return DtsmResult(0)
    path = [(int(i), int(j))]
    a, b = path[0]
    while CH[a, b] != 0:
        c = CH[a, b]
        a, b = (a + 1, b + 1) if c == 1 else (a, b + 1) if c == 2 else (a + 1, b)
        path.append((a, b))
    assert path[-1] == (k, l)
    id1 = getattr(d1, "id", "d1")
    id2 = getattr(d2, "id", "d2")
    pair = (SubtrajRef(id1, int(i) + 1, int(k) + 1, float(score)),
            SubtrajRef(id2, int(j) + 1, int(l) + 1, float(score)))
    return DtsmResult(int(score), pair, tuple(path))


def dtsm_score(d1, d2, alpha: float, distance: str = "euclidean") -> int:
    return dtsm(d1, d2, alpha, distance, with_pair=False).score


def replay(path, A) -> int:
    """Re-score an alignment path; raises ValueError if a step is not allowed."""
    A = _as_matrix(A)
    path = [tuple(s) for s in path]
    if not path or not A.similar(*path[0]):
        raise ValueError("alignment must start at a similar pair")
    total = 2
    for cur, nxt in zip(path, path[1:]):
        for cost, target in step_cost_and_advance(cur, A):
            if target == nxt:
                total += cost
                break
        else:
            raise ValueError(f"step {cur} -> {nxt} is not an allowed move")
    return total


# --- exhaustive oracle ------------------------------------------------------

def _enumerate_from(A: MatchMatrix, start: State):
    """Best (score, end) over every alignment prefix from a similar start.

    Plain depth-first enumeration of the branch tree, no memoisation.
    """
    best = (2, start)
    stack = [(start, 2)]
    while stack:
        state, acc = stack.pop()
        if acc > best[0] or (acc == best[0] and state < best[1]):
            best = (acc, state)
        for cost, nxt in step_cost_and_advance(state, A):
            stack.append((nxt, acc + cost))
    return best


def oracle_best_from(A, i: int, j: int) -> int:
    """Score of the best subtrajectory pair starting exactly at (i, j).

    A dissimilar starting pair scores 0 by definition.
    """
    A = _as_matrix(A)
    n1, n2 = A.shape
    if not (0 <= i < n1 and 0 <= j < n2) or not A.similar(i, j):
        return 0
    return _enumerate_from(A, (i, j))[0]


def dtsm_oracle(d1, d2, alpha: float, distance: str = "euclidean") -> DtsmResult:
    """Brute-force reference for :func:`dtsm` on short trajectories.

    Visits every start pair (dissimilar ones score 0) and enumerates the full
    branch tree below it, keeping the best prefix. Exponential; lengths are
    capped at ``MAX_ORACLE_LEN``.
    """
    x1, x2 = _xy(d1), _xy(d2)
    if len(x1) > MAX_ORACLE_LEN or len(x2) > MAX_ORACLE_LEN:
        raise ValueError(f"dtsm_oracle is limited to trajectories of length <= {MAX_ORACLE_LEN}")
    if len(x1) == 0 or len(x2) == 0:
        raise ValueError("dtsm_oracle needs two non-empty trajectories")
    A = build_match_matrix(x1, x2, alpha, distance)
    n1, n2 = A.shape
    best = 0
    arg = None
    for i in range(n1):
        for j in range(n2):
            if A.similar(i, j):
                s, end = _enumerate_from(A, (i, j))
            else:
                s, end = 0, None
            if s > best:
                best, arg = s, (i, j, end[0], end[1])
    if arg is None:
        return DtsmResult(0)
    i, j, k, l = arg
    pair = (SubtrajRef(getattr(d1, "id", "d1"), i + 1, k + 1, float(best)),
            SubtrajRef(getattr(d2, "id", "d2"), j + 1, l + 1, float(best)))
    return DtsmResult(best, pair)
