"""Retrieval-quality metrics, a synthetic corpus generator and the benchmark
harness that writes CSV tables and plot-data files.

Ground truth always comes from :func:`exhaustive_topk`; the graph search is
never graded against itself.

Report files (all columns in the order listed):

* ``metrics.csv``: query_id, method, k, hr, rr, r10_50, time_ms
* ``sweep_xi.csv``, ``sweep_k.csv``, ``sweep_n.csv``: one row per sweep point
* ``fig6.dat`` .. ``fig10.dat``: whitespace-separated ``x y`` series, one
  ``# series <name>`` comment line ahead of each series
"""

from __future__ import annotations

import csv
import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import GuardError
from .index import build_index
from .model import Config, Trajectory, TrajectoryStore
from .search import exhaustive_topk, full_ranking, query_topk

logger = logging.getLogger(__name__)

DEFAULT_GROUND_TRUTH_CAP = 20_000


# --- metrics --------------------------------------------------------------

def hr_k(pred: Sequence[str], truth: Sequence[str], k: int) -> float:
    """Share of the true top-``k`` found in the predicted top-``k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(pred) < k or len(truth) < k:
        raise ValueError(f"hr_k needs at least {k} ids in both lists (got {len(pred)}, {len(truth)})")
    return len(set(pred[:k]) & set(truth[:k])) / k


def r10_at_50(pred: Sequence[str], truth: Sequence[str], n_total: Optional[int] = None) -> float:
    """Share of the true top-10 found in the predicted top-50.

    ``pred`` may be shorter than 50 only when it is the whole result set,
    which the caller signals with ``n_total == len(pred)``.
    """
    if len(truth) < 10:
        raise ValueError("r10_at_50 needs at least 10 ground-truth ids")
    if len(pred) < 50 and n_total != len(pred):
        raise ValueError("r10_at_50 needs 50 predictions unless pred is the full result set")
    return len(set(pred[:50]) & set(truth[:10])) / 10


def rr(pred: Sequence[str], ranking: Sequence[str]) -> float:
    """Normalised mean ground-truth rank of ``pred``; 0 is ideal, at most 1."""
    pos = {t: i + 1 for i, t in enumerate(ranking)}
    missing = [t for t in pred if t not in pos]
    if missing:
        raise ValueError(f"pred ids not in ranking: {missing[:3]}")
    k = len(pred)
    n = len(ranking)
    if k == 0:
        raise ValueError("rr of an empty prediction")
    ideal = (k + 1) / 2
    if n <= ideal:
        return 0.0
    mean = sum(pos[t] for t in pred) / k
    return (mean - ideal) / (n - ideal)


# --- synthetic corpus -----------------------------------------------------

@dataclass(frozen=True)
class PlantedHint:
    query_id: str
    traj_id: Optional[str]
    start: Optional[int] = None
    end: Optional[int] = None


# lon/lat box and per-coordinate step sd of the synthetic walks, in degrees
_BOX = (116.1, 39.7, 116.7, 40.1)
_STEP = 8e-4


def _reflect(v: np.ndarray, lo: float, hi: float) -> np.ndarray:
    w = hi - lo
    v = np.mod(v - lo, 2 * w)
    return lo + np.where(v > w, 2 * w - v, v)


def _walk(rng: np.random.Generator, n: int) -> np.ndarray:
    """Gaussian random walk of ``n`` points from a uniform start, reflected into the box."""
    x0, y0, x1, y1 = _BOX
    start = rng.uniform((x0, y0), (x1, y1))
    xy = start + np.cumsum(rng.normal(0.0, _STEP, size=(n, 2)), axis=0)
    xy[:, 0] = _reflect(xy[:, 0], x0, x1)
    xy[:, 1] = _reflect(xy[:, 1], y0, y1)
    return xy


def synth_corpus(n_traj: int, len_range=(90, 300), query_len_range=(30, 90), n_queries: int = 100,
                 embed_rate: float = 0.8, noise: float = 0.1, seed: int = 0):
    """Random-walk trajectories plus queries, some planted as noisy slices.

    Data trajectories are Gaussian walks in a 0.6 x 0.4 degree lon/lat box.
    Planted queries are slices of a stored trajectory with Gaussian jitter
    of ``noise`` step sizes per coordinate; the others are fresh walks.
    Returns ``(store, queries, hints)``; ``hints[i].traj_id`` is
    the host of query ``i`` or None for an unplanted query.
    """
    lo, hi = len_range
    qlo, qhi = query_len_range
    if not (2 <= lo <= hi and 2 <= qlo <= qhi):
        raise ValueError("length ranges must satisfy 2 <= low <= high")
    if qlo > hi:
        raise ValueError("queries cannot be longer than every data trajectory")
    if not 0.0 <= embed_rate <= 1.0 or noise < 0 or n_traj < 1 or n_queries < 0:
        raise ValueError("invalid corpus parameters")
    rng = np.random.default_rng([seed, 0xC0DE])
    width = len(str(n_traj - 1))
    trajs = []
    for i in range(n_traj):
        n = int(rng.integers(lo, hi + 1))
        trajs.append(Trajectory(f"d{i:0{width}d}", _walk(rng, n)))
    store = TrajectoryStore(trajs)

    queries, hints = [], []
    qwidth = len(str(max(n_queries - 1, 0)))
    x0, y0, x1, y1 = _BOX
    for qi in range(n_queries):
        qid = f"q{qi:0{qwidth}d}"
        m = int(rng.integers(qlo, qhi + 1))
        if rng.random() < embed_rate:
            hosts = [t for t in range(n_traj) if len(trajs[t]) >= m]
            host = trajs[hosts[int(rng.integers(len(hosts)))]]
            s = int(rng.integers(0, len(host) - m + 1))
            xy = host.xy[s:s + m].copy()
            if noise > 0:
                xy += rng.normal(0.0, noise * _STEP, size=xy.shape)
            np.clip(xy[:, 0], x0, x1, out=xy[:, 0])
            np.clip(xy[:, 1], y0, y1, out=xy[:, 1])
            queries.append(Trajectory(qid, xy))
            hints.append(PlantedHint(qid, host.id, s + 1, s + m))
        else:
            queries.append(Trajectory(qid, _walk(rng, m)))
            hints.append(PlantedHint(qid, None))
    return store, queries, hints


# --- benchmark harness ----------------------------------------------------

@dataclass
class QueryEval:
    query_id: str
    method: str
    k: int
    hr: float
    rr: float
    r10_50: float
    time_ms: float
    visited: int = 0


@dataclass
class EvalReport:
    method: str
    k: int
    rows: List[QueryEval] = field(default_factory=list)
    config: Optional[Config] = None
    hr: Dict[int, float] = field(default_factory=dict)

    @property
    def mean_hr(self) -> float:
        return float(np.mean([r.hr for r in self.rows])) if self.rows else 0.0

    @property
    def r10_at_50(self) -> float:
        return float(np.mean([r.r10_50 for r in self.rows])) if self.rows else 0.0

    @property
    def rr(self) -> float:
        return float(np.mean([r.rr for r in self.rows])) if self.rows else 0.0

    @property
    def mean_ms(self) -> float:
        return float(np.mean([r.time_ms for r in self.rows])) if self.rows else 0.0


@dataclass
class GroundTruth:
    ranking: List[str]
    time_ms: float


def ground_truth(queries, store: TrajectoryStore, config: Config,
                 cap: int = DEFAULT_GROUND_TRUTH_CAP, force: bool = False) -> Dict[str, GroundTruth]:
    """Exhaustive full ranking per query."""
    if len(store) > cap and not force:
        raise GuardError(f"ground truth over N={len(store)} exceeds the cap of {cap}; pass force to override")
    cfg = config.replace(k=1)
    out = {}
    for q in queries:
        t0 = time.perf_counter()
        res = exhaustive_topk(q, store, cfg)
        ms = (time.perf_counter() - t0) * 1e3
        out[q.id] = GroundTruth(full_ranking(res), ms)
    return out


def _padded(pred: List[str], k: int) -> List[str]:
    # an ablated search may return fewer than k ids; empty slots count as misses
    return list(pred) + [f"\0missing{i}" for i in range(k - len(pred))]


def evaluate_method(method: str, queries, store: TrajectoryStore, index, config: Config,
                    truth: Dict[str, GroundTruth], ks=(10,)) -> EvalReport:
    """Grade the graph search against ``truth``.

    Each query runs once per distinct k (``config.k``, every entry of ``ks``
    and 50 for R10@50), since k moves the candidate floor. The per-query row
    reports the ``config.k`` run.
    """
    n = len(store)
    runs = sorted({min(k, n) for k in (config.k, *ks, 50)})
    report = EvalReport(method, config.k, config=config)
    hr_acc = {k: [] for k in ks}
    for q in queries:
        gt = truth[q.id].ranking
        preds, ms, visited = {}, 0.0, 0
        for k in runs:
            t0 = time.perf_counter()
            res = query_topk(q, index, store, config.replace(k=k))
            elapsed = (time.perf_counter() - t0) * 1e3
            preds[k] = _padded(res.ids, k)
            if k == min(config.k, n):
                returned = res.ids
                ms, visited = elapsed, len(res.record.visited)
        for k in ks:
            hr_acc[k].append(hr_k(preds[min(k, n)], gt, min(k, n)))
        k0 = min(config.k, n)
        p50 = preds[min(50, n)]
        report.rows.append(QueryEval(
            q.id, method, config.k,
            hr=hr_k(preds[k0], gt, k0),
            rr=rr(returned, gt) if returned else 1.0,
            r10_50=r10_at_50(p50, gt, n_total=n) if len(gt) >= 10 else float("nan"),
            time_ms=ms,
            visited=visited,
        ))
    report.hr = {k: float(np.mean(v)) for k, v in hr_acc.items()}
    return report


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(round(x, 6))
    return str(x)


def write_metrics_csv(path, reports: Iterable[EvalReport], truth=None, timings: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["query_id", "method", "k", "hr", "rr", "r10_50", "time_ms"])
        if truth is not None:
            for qid, gt in truth.items():
                w.writerow([qid, "exhaustive", "", 1.0, 0.0, 1.0, _fmt(gt.time_ms) if timings else ""])
        for rep in reports:
            for r in rep.rows:
                w.writerow([r.query_id, r.method, r.k, _fmt(r.hr), _fmt(r.rr), _fmt(r.r10_50),
                            _fmt(r.time_ms) if timings else ""])


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_dat(path, series: Dict[str, Sequence[Tuple[float, float]]]) -> None:
    with open(path, "w") as fh:
        for name, pts in series.items():
            fh.write(f"# series {name}\n")
            for x, y in pts:
                fh.write(f"{_fmt(x)} {_fmt(y)}\n")
            fh.write("\n")


def time_dtsm_pairs(n_pairs: int = 10, lengths=(50, 100, 200), alpha: float = 2 * _STEP,
                    seed: int = 0) -> List[Tuple[int, float]]:
    """Wall time (ms) to score ``n_pairs`` random pairs at each length."""
    from .dtsm import dtsm_score

    rng = np.random.default_rng([seed, 0xF16])
    warm = _walk(rng, 8)
    dtsm_score(warm, warm, alpha)
    out = []
    for n in lengths:
        pairs = [(_walk(rng, n), _walk(rng, n)) for _ in range(n_pairs)]
        t0 = time.perf_counter()
        for a, b in pairs:
            dtsm_score(a, b, alpha)
        out.append((n, (time.perf_counter() - t0) * 1e3))
    return out


def run_benchmark(store: TrajectoryStore, queries, config: Config, out_dir=None,
                  xi_values=(2, 5, 10, 20), k_values=(10, 20, 50),
                  n_values: Sequence[int] = (), cap: int = DEFAULT_GROUND_TRUTH_CAP,
                  force: bool = False, timings: bool = True,
                  ablations: bool = True, index=None) -> Dict[str, EvalReport]:
    """Ground truth, default search, ablations and the sweeps; writes report files.

    Sweeps over ``xi`` rebuild the index per point. ``n_values`` prefixes of
    the store give the scalability series (skipped when empty). With
    ``timings=False`` every wall-time column is left blank so reruns are
    byte-identical. A prebuilt ``index`` over ``store`` may be passed in.
    """
    if len(store) > cap and not force:
        raise GuardError(f"ground truth over N={len(store)} exceeds the cap of {cap}; pass force to override")
    queries = list(queries)
    truth = ground_truth(queries, store, config, cap, force)
    ks = tuple(sorted({config.k, *[k for k in k_values if k <= len(store)]}))

    if index is None:
        index = build_index(store, config)
    reports = {"graph": evaluate_method("graph", queries, store, index, config, truth, ks)}
    if ablations:
        reports["no-gari"] = evaluate_method("no-gari", queries, store, index,
                                             config.replace(use_gari=False), truth, ks)
        reports["no-record"] = evaluate_method("no-record", queries, store, index,
                                               config.replace(record_tracking=False), truth, ks)
        cfg_nr = config.replace(delta=1.0)
        reports["no-random"] = evaluate_method("no-random", queries, store, build_index(store, cfg_nr),
                                               cfg_nr, truth, ks)

    xi_rows = []
    for xi in xi_values:
        if xi > len(store) - 1:
            continue
        cfg = config.replace(xi=xi)
        rep = evaluate_method(f"xi={xi}", queries, store, build_index(store, cfg), cfg, truth, ks)
        xi_rows.append((xi, rep.mean_hr, rep.r10_at_50, rep.rr, rep.mean_ms))

    k_rows = [(k, reports["graph"].hr[k]) for k in ks]

    n_rows = []
    for n in n_values:
        if n > len(store):
            continue
        sub = TrajectoryStore([store.at(i) for i in range(n)])
        cfg = config.replace(k=min(config.k, n))
        sub_truth = ground_truth(queries, sub, cfg, cap, force)
        rep = evaluate_method(f"n={n}", queries, sub, build_index(sub, cfg), cfg, sub_truth, (cfg.k,))
        ex_ms = float(np.mean([g.time_ms for g in sub_truth.values()]))
        n_rows.append((n, rep.mean_ms, ex_ms, rep.mean_hr))

    fig6 = time_dtsm_pairs(alpha=config.alpha, seed=config.seed) if timings else []

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_metrics_csv(os.path.join(out_dir, "metrics.csv"), reports.values(), truth, timings)
        write_table(os.path.join(out_dir, "sweep_xi.csv"), ["xi", "hr", "r10_50", "rr", "time_ms"],
                    [r if timings else r[:4] + ("",) for r in xi_rows])
        write_table(os.path.join(out_dir, "sweep_k.csv"), ["k", "hr"], k_rows)
        write_table(os.path.join(out_dir, "sweep_n.csv"), ["n", "graph_ms", "exhaustive_ms", "hr"],
                    [r if timings else (r[0], "", "", r[3]) for r in n_rows])
        write_dat(os.path.join(out_dir, "fig6.dat"), {"dtsm_10_pairs_ms": fig6})
        write_dat(os.path.join(out_dir, "fig8.dat"), {"hr_vs_xi": [(r[0], r[1]) for r in xi_rows]})
        write_dat(os.path.join(out_dir, "fig9.dat"), {"hr_vs_k": k_rows})
        write_dat(os.path.join(out_dir, "fig10.dat"), {
            "graph_ms": [(r[0], r[1]) for r in n_rows] if timings else [],
            "exhaustive_ms": [(r[0], r[2]) for r in n_rows] if timings else [],
        })
    return reports
