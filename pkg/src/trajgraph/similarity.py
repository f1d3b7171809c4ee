"""Full-trajectory distances, distance-to-similarity transforms and the
representative-similarity scorers used to rank data trajectories.

The built-in scorer ``exacts`` enumerates every slice of the data
trajectory, reusing the DP column across ends sharing a start. Other
scorers can be registered by name::

    @register_scorer("mine")
    def mine(query, data, config) -> RepScore: ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List

import numpy as np

from . import _kernels as K
from .errors import ConfigError
from .model import Config, SubtrajRef, Trajectory, TrajectoryStore


@dataclass(frozen=True)
class Metric:
    kind: str = "dtw"
    eps: float = 1.0
    gap: tuple = (0.0, 0.0)
    distance: str = "euclidean"

    def __post_init__(self):
        if self.kind not in K.METRIC_CODES:
            raise ConfigError(f"unknown metric {self.kind!r}")
        if self.kind == "edr" and not self.eps > 0:
            raise ConfigError("EDR requires eps > 0")

    @classmethod
    def from_config(cls, config: Config) -> "Metric":
        return cls(config.metric, config.eps, config.erp_gap, config.distance)

    def __call__(self, a, b) -> float:
        return metric_distance(a, b, self)


@dataclass(frozen=True)
class RepScore:
    """Best slice of one data trajectory for a query, with its score."""

    score: float
    best: SubtrajRef
    distance: float


def _xy(t) -> np.ndarray:
    xy = t.xy if isinstance(t, Trajectory) else np.asarray(t, dtype=np.float64).reshape(-1, 2)
    return np.ascontiguousarray(xy, dtype=np.float64)


def dtw(a, b, distance: str = "euclidean") -> float:
    a, b = _xy(a), _xy(b)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("dtw needs two non-empty trajectories")
    return float(K.dtw(a, b, K.DIST_CODES[distance]))


def edr(a, b, eps: float) -> float:
    if not eps > 0:
        raise ValueError("eps must be > 0")
    return float(K.edr(_xy(a), _xy(b), float(eps)))


def erp(a, b, gap=(0.0, 0.0), distance: str = "euclidean") -> float:
    return float(K.erp(_xy(a), _xy(b), float(gap[0]), float(gap[1]), K.DIST_CODES[distance]))


def metric_distance(a, b, metric: Metric) -> float:
    if metric.kind == "dtw":
        return dtw(a, b, metric.distance)
    if metric.kind == "edr":
        return edr(a, b, metric.eps)
    return erp(a, b, metric.gap, metric.distance)


def sim_transform(dist: float, query_len: int, kind: str = "reciprocal") -> float:
    """Map a non-negative distance to a similarity in (0, 1]."""
    if dist < 0:
        raise ValueError("distance must be non-negative")
    if query_len < 1:
        raise ValueError("query_len must be positive")
    x = dist / query_len
    if kind == "reciprocal":
        return 1.0 / (1.0 + x)
    if kind == "exp":
        return math.exp(-x)
    raise ConfigError(f"unknown sim_transform {kind!r}")


def _kernel_args(metric: Metric):
    code = K.METRIC_CODES[metric.kind]
    return code, float(metric.eps), float(metric.gap[0]), float(metric.gap[1]), K.DIST_CODES[metric.distance]


def exact_s(query, data: Trajectory, metric: Metric, transform: str = "reciprocal") -> RepScore:
    """Exact representative subtrajectory of ``data`` for ``query``.

    Ties on distance go to the smaller start, then the smaller end.
    """
    q = _xy(query)
    p = _xy(data)
    if len(q) == 0 or len(p) == 0:
        raise ValueError("exact_s needs non-empty query and data")
    d, a, b = K.exact_s(q, p, *_kernel_args(metric))
    d = float(d)
    ref = SubtrajRef(data.id, int(a) + 1, int(b) + 1, sim_transform(d, len(q), transform))
    return RepScore(ref.score, ref, d)


def exact_s_batch(query, store: TrajectoryStore, positions, metric: Metric,
                  transform: str = "reciprocal") -> List[RepScore]:
    """``exact_s`` against many stored trajectories in one compiled call."""
    q = _xy(query)
    idx = np.asarray(positions, dtype=np.int64)
    if len(idx) == 0:
        return []
    dist, starts, ends = K.exact_s_many(q, store.coords, store.offsets, idx, *_kernel_args(metric))
    out = []
    m = len(q)
    for pos, d, a, b in zip(idx.tolist(), dist.tolist(), starts.tolist(), ends.tolist()):
        s = sim_transform(d, m, transform)
        out.append(RepScore(s, SubtrajRef(store.ids[pos], a + 1, b + 1, s), d))
    return out


# --- scorer registry ------------------------------------------------------

Scorer = Callable[[Trajectory, Trajectory, Config], RepScore]
_SCORERS: Dict[str, Scorer] = {}


def register_scorer(name: str, fn: Scorer = None):
    """Register ``fn(query, data, config) -> RepScore`` under ``name``.

    Usable as a decorator. Re-registering a name replaces the old scorer.
    """
    def deco(f):
        _SCORERS[name.lower()] = f
        return f
    return deco(fn) if fn is not None else deco


def unregister_scorer(name: str) -> None:
    _SCORERS.pop(name.lower(), None)


def available_scorers() -> list:
    return sorted(_SCORERS)


def get_scorer(name: str) -> Scorer:
    try:
        return _SCORERS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown scorer {name!r}; available: {available_scorers()}") from None


@register_scorer("exacts")
def _exacts_scorer(query, data, config: Config) -> RepScore:
    return exact_s(query, data, Metric.from_config(config), config.sim_transform)


def rep_similarity(query, data: Trajectory, config: Config) -> RepScore:
    return get_scorer(config.scorer)(query, data, config)


def rep_similarity_batch(query, store: TrajectoryStore, traj_ids: Iterable[str],
                         config: Config) -> List[RepScore]:
    """Score several stored trajectories; uses the compiled batch path for exacts."""
    traj_ids = list(traj_ids)
    scorer = get_scorer(config.scorer)
    if scorer is _exacts_scorer:
        pos = [store.index_of(t) for t in traj_ids]
        return exact_s_batch(query, store, pos, Metric.from_config(config), config.sim_transform)
    return [scorer(query, store[t], config) for t in traj_ids]
