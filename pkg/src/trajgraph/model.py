"""Core domain types: points, trajectories, subtrajectory references, the
trajectory store and the run configuration.

Indices exposed to users (``SubtrajRef``, CSV files, ``slice``) are 1-based
and inclusive on both ends. Arrays held internally are ordinary 0-based numpy
arrays.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError

logger = logging.getLogger(__name__)

EARTH_RADIUS_M = 6371008.8

METRICS = ("dtw", "edr", "erp")
DISTANCES = ("euclidean", "haversine")
SIM_TRANSFORMS = ("reciprocal", "exp")


class Point(NamedTuple):
    lon: float
    lat: float
    t: Optional[float] = None


def distance(a: Point, b: Point, kind: str = "euclidean") -> float:
    """Distance between two points.

    ``euclidean`` treats (lon, lat) as planar coordinates, ``haversine``
    returns great-circle metres.
    """
    if kind == "euclidean":
        dx = a[0] - b[0]
        dy = a[1] - b[1]
        return math.sqrt(dx * dx + dy * dy)
    if kind == "haversine":
        return haversine(a[0], a[1], b[0], b[1])
    raise ConfigError(f"unknown distance kind {kind!r}")


def haversine(lon1, lat1, lon2, lat2):
    p1 = math.radians(lat1)
    p2 = math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


class Trajectory:
    """An identified, ordered sequence of 2-D points.

    ``xy`` is an ``(n, 2)`` float64 array of (lon, lat); ``t`` is an optional
    length-``n`` array of timestamps. Timestamps are carried along but no
    algorithm in this package reads them.
    """

    __slots__ = ("id", "xy", "t")

    def __init__(self, id, xy, t=None):
        xy = np.asarray(xy, dtype=np.float64)
        if xy.ndim != 2 or xy.shape[1] != 2:
            raise ValueError(f"trajectory {id!r}: expected an (n, 2) array, got {xy.shape}")
        if len(xy) == 0:
            raise ValueError(f"trajectory {id!r} is empty")
        if t is not None:
            t = np.asarray(t, dtype=np.float64)
            if t.shape != (len(xy),):
                raise ValueError(f"trajectory {id!r}: timestamp count does not match points")
        self.id = str(id)
        self.xy = xy
        self.t = t

    @classmethod
    def from_points(cls, id, points: Iterable[Sequence[float]]) -> "Trajectory":
        pts = [tuple(p) for p in points]
        xy = [(p[0], p[1]) for p in pts]
        has_t = [len(p) > 2 and p[2] is not None for p in pts]
        t = [p[2] for p in pts] if pts and all(has_t) else None
        return cls(id, xy, t)

    def __len__(self):
        return len(self.xy)

    def __getitem__(self, i) -> Point:
        lon, lat = self.xy[i]
        return Point(float(lon), float(lat), None if self.t is None else float(self.t[i]))

    def __iter__(self) -> Iterator[Point]:
        for i in range(len(self)):
            yield self[i]

    @property
    def points(self) -> list:
        return list(self)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        if self.id != other.id or not np.array_equal(self.xy, other.xy):
            return False
        if (self.t is None) != (other.t is None):
            return False
        return self.t is None or np.array_equal(self.t, other.t)

    __hash__ = None

    def __repr__(self):
        return f"Trajectory(id={self.id!r}, n={len(self)})"

    def validate(self):
        """Check the invariants a stored trajectory must satisfy."""
        if len(self) < 2:
            raise ValueError(f"trajectory {self.id!r} has fewer than 2 points")
        if not np.all(np.isfinite(self.xy)):
            raise ValueError(f"trajectory {self.id!r} has non-finite coordinates")
        lon, lat = self.xy[:, 0], self.xy[:, 1]
        if lon.min() < -180 or lon.max() > 180 or lat.min() < -90 or lat.max() > 90:
            raise ValueError(f"trajectory {self.id!r} has coordinates outside lon/lat range")
        if self.t is not None and np.any(np.diff(self.t) <= 0):
            raise ValueError(f"trajectory {self.id!r} has non-increasing timestamps")


def slice(t: Trajectory, s: int, e: int) -> Trajectory:
    """Points ``s..e`` (1-based, inclusive) as a view sharing ``t``'s buffers."""
    n = len(t)
    if not (1 <= s <= e <= n):
        raise IndexError(f"slice [{s}, {e}] out of range for trajectory of length {n}")
    tt = None if t.t is None else t.t[s - 1:e]
    return Trajectory(t.id, t.xy[s - 1:e], tt)


@dataclass(frozen=True)
class SubtrajRef:
    """A contiguous slice ``traj_id[start..end]`` (1-based, inclusive)."""

    traj_id: str
    start: int
    end: int
    score: Optional[float] = None

    def __post_init__(self):
        if not 1 <= self.start <= self.end:
            raise ValueError(f"invalid subtrajectory bounds [{self.start}, {self.end}]")


class TrajectoryStore:
    """Immutable id-keyed collection of trajectories.

    All coordinates are packed into one contiguous ``coords`` array with
    ``offsets`` delimiting each trajectory, so numeric kernels can address
    the whole database without Python-level iteration. The ``Trajectory``
    objects handed out are views into that buffer.
    """

    def __init__(self, trajectories: Iterable[Trajectory]):
        trajs = list(trajectories)
        ids = [t.id for t in trajs]
        dup = [k for k, c in Counter(ids).items() if c > 1]
        if dup:
            raise DataError(f"duplicate trajectory ids: {dup[:5]}")
        for t in trajs:
            t.validate()
        lengths = np.array([len(t) for t in trajs], dtype=np.int64)
        self.offsets = np.zeros(len(trajs) + 1, dtype=np.int64)
        np.cumsum(lengths, out=self.offsets[1:])
        self.coords = (np.concatenate([t.xy for t in trajs]) if trajs
                       else np.empty((0, 2), dtype=np.float64))
        self.coords.setflags(write=False)
        self.ids = ids
        self._pos = {k: i for i, k in enumerate(ids)}
        self._trajs = []
        for i, t in enumerate(trajs):
            lo, hi = self.offsets[i], self.offsets[i + 1]
            self._trajs.append(Trajectory(t.id, self.coords[lo:hi], t.t))

    def __len__(self):
        return len(self.ids)

    def __contains__(self, traj_id):
        return traj_id in self._pos

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self._trajs)

    def __getitem__(self, traj_id) -> Trajectory:
        return self._trajs[self._pos[traj_id]]

    def get(self, traj_id) -> Trajectory:
        try:
            return self[traj_id]
        except KeyError:
            raise KeyError(f"unknown trajectory id {traj_id!r}") from None

    def at(self, i: int) -> Trajectory:
        return self._trajs[i]

    def index_of(self, traj_id) -> int:
        return self._pos[traj_id]

    def digest(self) -> str:
        """SHA-256 over ids and coordinates; identifies a store's contents."""
        h = hashlib.sha256()
        for t in self._trajs:
            h.update(t.id.encode("utf-8"))
            h.update(b"\0")
            h.update(np.ascontiguousarray(t.xy, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class Config:
    """Run configuration for index building and querying.

    ``alpha`` has no default: its unit is that of the point distance in use
    (degrees for planar lon/lat, metres for haversine) and no value is safe
    across datasets.
    """

    alpha: float
    grid_m: int = 10
    xi: int = 10
    delta: float = 0.8
    gari_neighbor_counts: tuple = (2, 1, 1)
    candidate_counts: tuple = (50, 50)
    k: int = 10
    metric: str = "dtw"
    scorer: str = "exacts"
    seed: int = 0
    sim_transform: str = "reciprocal"
    distance: str = "euclidean"
    edr_eps: Optional[float] = None
    erp_gap: tuple = (0.0, 0.0)
    min_candidates: Optional[int] = None
    use_gari: bool = True
    record_tracking: bool = True

    def __post_init__(self):
        object.__setattr__(self, "gari_neighbor_counts", tuple(int(x) for x in self.gari_neighbor_counts))
        object.__setattr__(self, "candidate_counts", tuple(int(x) for x in self.candidate_counts))
        object.__setattr__(self, "erp_gap", tuple(float(x) for x in self.erp_gap))
        if not (isinstance(self.alpha, (int, float)) and math.isfinite(self.alpha) and self.alpha > 0):
            raise ConfigError(f"alpha must be a positive finite number, got {self.alpha!r}")
        if self.grid_m < 1:
            raise ConfigError("grid_m must be >= 1")
        if self.xi < 1:
            raise ConfigError("xi must be >= 1")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not 0.0 <= self.delta <= 1.0:
            raise ConfigError("delta must lie in [0, 1]")
        if len(self.gari_neighbor_counts) != 3 or min(self.gari_neighbor_counts) < 0:
            raise ConfigError("gari_neighbor_counts must be three non-negative integers")
        if len(self.candidate_counts) != 2 or min(self.candidate_counts) < 0:
            raise ConfigError("candidate_counts must be two non-negative integers")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.distance not in DISTANCES:
            raise ConfigError(f"distance must be one of {DISTANCES}, got {self.distance!r}")
        if self.sim_transform not in SIM_TRANSFORMS:
            raise ConfigError(f"sim_transform must be one of {SIM_TRANSFORMS}")
        if self.edr_eps is not None and not self.edr_eps > 0:
            raise ConfigError("edr_eps must be > 0")
        if self.min_candidates is not None and self.min_candidates < 0:
            raise ConfigError("min_candidates must be >= 0")

    @property
    def eps(self) -> float:
        return self.alpha if self.edr_eps is None else self.edr_eps

    @property
    def candidate_floor(self) -> int:
        if self.min_candidates is not None:
            return self.min_candidates
        return max(4 * self.k, 50)

    def neighbor_split(self, n_nodes: int) -> tuple:
        """(similar, random) neighbour quotas for a CNDI of ``n_nodes`` nodes."""
        xi = min(self.xi, max(n_nodes - 1, 0))
        n_sim = int(math.floor(self.delta * xi + 0.5))
        return n_sim, xi - n_sim

    def replace(self, **changes) -> "Config":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


# --- CSV ingest ---------------------------------------------------------

CSV_HEADER = ["traj_id", "seq", "lon", "lat", "t"]


@dataclass
class IngestStats:
    read: int = 0
    kept: int = 0
    too_short: int = 0
    too_long: int = 0
    erroneous: int = 0
    duplicate_points: int = 0
    lengths: list = field(default_factory=list)

    def histogram(self, bins: int = 5) -> list:
        """(lo, hi, count) buckets of kept trajectory lengths."""
        if not self.lengths:
            return []
        counts, edges = np.histogram(self.lengths, bins=bins)
        return [(int(edges[i]), int(edges[i + 1]), int(c)) for i, c in enumerate(counts)]


def _parse_rows(lines: Iterable[str]):
    """Yield (line_no, traj_id, points) groups; raises DataError on bad rows."""
    reader = csv.reader(lines)
    seen = set()
    cur_id = None
    cur_pts = []
    cur_line = 0
    last_seq = None
    for line_no, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if line_no == 1 and row[0].strip() == "traj_id":
            continue
        if len(row) not in (4, 5):
            raise DataError(f"expected 4 or 5 fields, got {len(row)}", line_no)
        tid = row[0].strip()
        if not tid:
            raise DataError("empty traj_id", line_no)
        try:
            seq = int(row[1])
            lon = float(row[2])
            lat = float(row[3])
            t = float(row[4]) if len(row) == 5 and row[4].strip() != "" else None
        except ValueError as exc:
            raise DataError(f"non-numeric field ({exc})", line_no) from None
        if tid != cur_id:
            if cur_id is not None:
                yield cur_line, cur_id, cur_pts
                seen.add(cur_id)
            if tid in seen:
                raise DataError(f"rows for trajectory {tid!r} are not contiguous", line_no)
            cur_id, cur_pts, cur_line, last_seq = tid, [], line_no, None
        if last_seq is not None and seq <= last_seq:
            raise DataError(f"seq not ascending within trajectory {tid!r}", line_no)
        last_seq = seq
        cur_pts.append((lon, lat, t))
    if cur_id is not None:
        yield cur_line, cur_id, cur_pts


def read_csv(source, min_len: int = 2, max_len: Optional[int] = None):
    """Parse a trajectory CSV (``traj_id,seq,lon,lat[,t]`` per row).

    Malformed rows abort with a :class:`DataError` carrying the line number.
    Whole trajectories are dropped (and counted in the returned stats) when
    they fall outside ``[min_len, max_len]`` after removing consecutive
    duplicate points, or when their coordinates or timestamps are invalid.
    Returns ``(trajectories, stats)``.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_csv(fh, min_len, max_len)
    min_len = max(min_len, 2)
    stats = IngestStats()
    out = []
    for _line, tid, pts in _parse_rows(source):
        stats.read += 1
        dedup = [pts[0]]
        for p in pts[1:]:
            if p[0] == dedup[-1][0] and p[1] == dedup[-1][1]:
                stats.duplicate_points += 1
                continue
            dedup.append(p)
        if len(dedup) < min_len:
            stats.too_short += 1
            continue
        if max_len is not None and len(dedup) > max_len:
            stats.too_long += 1
            continue
        has_t = [p[2] is not None for p in dedup]
        if any(has_t) and not all(has_t):
            stats.erroneous += 1
            continue
        traj = Trajectory(tid, [(p[0], p[1]) for p in dedup],
                          [p[2] for p in dedup] if all(has_t) else None)
        try:
            traj.validate()
        except ValueError as exc:
            logger.debug("dropping %s: %s", tid, exc)
            stats.erroneous += 1
            continue
        out.append(traj)
        stats.kept += 1
        stats.lengths.append(len(traj))
    return out, stats


def write_csv(trajectories: Iterable[Trajectory], dest) -> None:
    """Write trajectories in the canonical ingest format (lossless floats)."""
    if isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__"):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_csv(trajectories, fh)
        return
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for traj in trajectories:
        for i, (lon, lat) in enumerate(traj.xy.tolist(), start=1):
            t = "" if traj.t is None else repr(float(traj.t[i - 1]))
            w.writerow([traj.id, i, repr(lon), repr(lat), t])


def load_store(path) -> TrajectoryStore:
    trajs, _ = read_csv(path)
    return TrajectoryStore(trajs)


def save_store(store: TrajectoryStore, path) -> None:
    write_csv(store, path)


def store_to_csv_text(store: TrajectoryStore) -> str:
    buf = io.StringIO()
    write_csv(store, buf)
    return buf.getvalue()
