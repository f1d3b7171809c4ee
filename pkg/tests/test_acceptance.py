"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict; the lines are printed together in the
``acceptance`` section of the pytest terminal summary.
"""

import contextlib
import io
import time

import numpy as np
import pytest

from trajgraph.cli import main
from trajgraph.dtsm import build_match_matrix, dtsm, dtsm_oracle, dtsm_score, oracle_best_from, replay
from trajgraph.evaluation import ground_truth, hr_k, r10_at_50, rr, synth_corpus
from trajgraph.index import build_index, dumps_index
from trajgraph.model import Config, Trajectory, TrajectoryStore
from trajgraph.search import exhaustive_topk, query_topk
from trajgraph.similarity import Metric, exact_s, sim_transform

from oracles import check_index_invariants, dtw_table, edr_table, erp_table, naive_exact_s

VERDICTS = {}

# match threshold for the synthetic corpus: five mean sampling steps
CORPUS_ALPHA = 0.004


def verdict(n, ok, detail):
    VERDICTS[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


def tuned_pair(rng):
    """Random pair (lengths <= 8) with alpha at the median point distance."""
    a = rng.uniform(0, 1, size=(int(rng.integers(1, 9)), 2))
    b = rng.uniform(0, 1, size=(int(rng.integers(1, 9)), 2))
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
    return a, b, float(np.median(d)) + 1e-12


# --- 1 ------------------------------------------------------------------------

def test_c01_dtsm_oracle_equivalence():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    bad, density = 0, []
    for _ in range(1000):
        a, b, alpha = tuned_pair(rng)
        A = build_match_matrix(a, b, alpha)
        density.append(float((A.entries > 0).mean()))
        got, want = dtsm(a, b, alpha), dtsm_oracle(a, b, alpha)
        same = got.score == want.score and got.pair == want.pair
        if got.pair is not None:
            same = same and replay(got.path, A) == got.score
        bad += not same
    secs = time.perf_counter() - t0
    dens = float(np.mean(density))
    ok = bad == 0 and secs < 60 and 0.3 <= dens <= 0.7
    verdict(1, ok, f"mismatches={bad}/1000 density={dens:.2f} time={secs:.1f}s")
    assert ok


# --- 2 ------------------------------------------------------------------------

def test_c02_pruning_soundness():
    rng = np.random.default_rng(102)
    violations, checked = 0, 0
    for _ in range(500):
        a, b, alpha = tuned_pair(rng)
        A = build_match_matrix(a, b, alpha)
        n1, n2 = A.shape
        for i in range(n1):
            for j in range(n2):
                if not A.similar(i, j):
                    checked += 1
                    violations += oracle_best_from(A, i, j) > oracle_best_from(A, i + 1, j + 1)
    verdict(2, violations == 0, f"violations={violations} over {checked} dissimilar starts")
    assert violations == 0


# --- 3 ------------------------------------------------------------------------

def _walk_pairs(rng, n, count):
    step = lambda: np.cumsum(rng.normal(0, 1.0, size=(n, 2)), axis=0)
    return [(step(), step()) for _ in range(count)]


def _time_pairs(pairs, alpha, reps=1):
    t0 = time.perf_counter()
    for _ in range(reps):
        for a, b in pairs:
            dtsm_score(a, b, alpha)
    return (time.perf_counter() - t0) / reps


def test_c03_dtsm_speed():
    rng = np.random.default_rng(103)
    _time_pairs(_walk_pairs(rng, 8, 1), 0.5)
    ten = _walk_pairs(rng, 100, 10)
    ms = min(_time_pairs(ten, 0.5) for _ in range(3)) * 1e3
    times = []
    sizes = (50, 100, 200)
    for n in sizes:
        pairs = [(rng.uniform(0, 100, size=(n, 2)), rng.uniform(0, 100, size=(n, 2))) for _ in range(10)]
        times.append(min(_time_pairs(pairs, 1.0, 3) for _ in range(3)))
    slope = float(np.polyfit(np.log(sizes), np.log(times), 1)[0])
    ok = ms <= 100 and slope < 3
    verdict(3, ok, f"10 pairs @100 = {ms:.2f} ms; doubling exponent = {slope:.2f}")
    assert ok


# --- 4 ------------------------------------------------------------------------

def test_c04_exact_s_exhaustive():
    rng = np.random.default_rng(104)
    metrics = {"dtw": (Metric("dtw"), dtw_table),
               "edr": (Metric("edr", eps=0.8), lambda a, b: edr_table(a, b, 0.8)),
               "erp": (Metric("erp", gap=(0.5, -0.5)), lambda a, b: erp_table(a, b, (0.5, -0.5)))}
    bad, total = 0, 0
    for kind, (metric, oracle) in metrics.items():
        for m in range(1, 9):
            for n in range(1, 13):
                for _ in range(3):
                    q = rng.uniform(-2, 2, size=(m, 2))
                    p = rng.uniform(-2, 2, size=(n, 2))
                    got = exact_s(q, Trajectory("p", p), metric)
                    d, a, b = naive_exact_s(q, p, oracle)
                    total += 1
                    bad += not (got.distance == d and (got.best.start, got.best.end) == (a + 1, b + 1)
                                and got.score == sim_transform(d, m))
    verdict(4, bad == 0, f"mismatches={bad}/{total} (dtw, edr, erp; m<=8, n<=12)")
    assert bad == 0


# --- 5 ------------------------------------------------------------------------

@pytest.mark.slow
def test_c05_retrieval_quality():
    store, queries, _ = synth_corpus(2000, n_queries=100, embed_rate=0.8, noise=0.1, seed=5)
    cfg = Config(alpha=CORPUS_ALPHA)
    truth = ground_truth(queries, store, cfg)
    index = build_index(store, cfg)
    hr = {10: [], 20: [], 50: []}
    r1050, rrs = [], []
    for q in queries:
        gt = truth[q.id].ranking
        for k in hr:
            hr[k].append(hr_k(query_topk(q, index, store, cfg.replace(k=k)).ids, gt, k))
        p50 = query_topk(q, index, store, cfg.replace(k=50)).ids
        r1050.append(r10_at_50(p50, gt))
        rrs.append(rr(query_topk(q, index, store, cfg).ids, gt))
    hr10 = float(np.mean(hr[10]))
    ok = hr10 >= 0.80
    verdict(5, ok, f"HR-10={hr10:.3f} (gate 0.80); HR-20={np.mean(hr[20]):.3f} "
                   f"HR-50={np.mean(hr[50]):.3f} R10@50={np.mean(r1050):.3f} RR={np.mean(rrs):.4f}")
    assert ok


# --- 6 ------------------------------------------------------------------------

@pytest.mark.slow
def test_c06_speedup():
    store, queries, _ = synth_corpus(10_000, n_queries=20, seed=6)
    cfg = Config(alpha=CORPUS_ALPHA)
    index = build_index(store, cfg)
    fast = []
    for q in queries:
        t0 = time.perf_counter()
        query_topk(q, index, store, cfg)
        fast.append(time.perf_counter() - t0)
    slow = []
    for q in queries[:5]:
        t0 = time.perf_counter()
        exhaustive_topk(q, store, cfg)
        slow.append(time.perf_counter() - t0)
    ratio = float(np.mean(slow) / np.mean(fast))
    ok = ratio >= 10
    verdict(6, ok, f"exhaustive/graph query time = {ratio:.1f}x (gate 10x); "
                   f"{np.mean(fast) * 1e3:.1f} ms vs {np.mean(slow) * 1e3:.0f} ms")
    assert ok


# --- 7 ------------------------------------------------------------------------

def test_c07_index_invariants():
    from conftest import random_store
    rng = np.random.default_rng(107)
    for c in range(50):
        n = int(rng.integers(2, 60))
        store = random_store(rng, n, 3, 10, 6.0)
        cfg = Config(alpha=float(rng.uniform(0.3, 2.0)), grid_m=int(rng.integers(1, 6)),
                     xi=int(rng.integers(1, 15)), delta=float(rng.uniform(0, 1)),
                     candidate_counts=tuple(int(x) for x in rng.integers(0, 20, size=2)),
                     gari_neighbor_counts=tuple(int(x) for x in rng.integers(0, 4, size=3)), seed=c)
        bundle = build_index(store, cfg)
        check_index_invariants(bundle, store, cfg)
        data = dumps_index(bundle)
        from trajgraph.index import loads_index
        assert dumps_index(loads_index(data)) == data
        assert dumps_index(build_index(store, cfg)) == data
    verdict(7, True, "50 random configs: invariants, byte round-trip, identical rebuilds")


# --- 8 ------------------------------------------------------------------------

def two_cluster_corpus(seed=0, n_a=51, n_b=30, n_q=50):
    """Cluster A holds the only upper-layer node; every planted answer is in B.

    With 51 members in A, each A node's 50 spatially nearest peers are its
    cluster mates, so only random neighbours lead from A into B.
    """
    rng = np.random.default_rng(seed)

    def walk(n, lo, hi):
        return rng.uniform(lo, hi) + np.cumsum(rng.normal(0, 0.1, size=(n, 2)), axis=0)

    trajs = [Trajectory(f"a{i:02d}", walk(int(rng.integers(20, 40)), [0, 0], [20, 20])) for i in range(n_a)]
    trajs += [Trajectory(f"b{i:02d}", walk(int(rng.integers(20, 40)), [100, 0], [103, 3])) for i in range(n_b)]
    queries = []
    for j in range(n_q):
        host = trajs[n_a + int(rng.integers(n_b))]
        m = int(rng.integers(8, 15))
        s = int(rng.integers(0, len(host) - m + 1))
        queries.append(Trajectory(f"q{j:02d}", host.xy[s:s + m] + rng.normal(0, 0.01, size=(m, 2))))
    return TrajectoryStore(trajs), queries


def _overlap(pred, truth, k=10):
    return len(set(pred[:k]) & set(truth[:k])) / k


def test_c08_ablation_deltas():
    store, queries = two_cluster_corpus()
    cfg = Config(alpha=0.3, grid_m=1)
    index = build_index(store, cfg)
    assert index.gari.nodes[0].startswith("a")
    cfg1 = cfg.replace(delta=1.0)
    index1 = build_index(store, cfg1)
    no_rec = cfg.replace(record_tracking=False)
    hr = {"default": [], "delta=1": [], "no-record": []}
    for q in queries:
        gt = exhaustive_topk(q, store, cfg).ids
        hr["default"].append(_overlap(query_topk(q, index, store, cfg).ids, gt))
        hr["delta=1"].append(_overlap(query_topk(q, index1, store, cfg1).ids, gt))
        hr["no-record"].append(_overlap(query_topk(q, index, store, no_rec).ids, gt))
    m = {k: float(np.mean(v)) for k, v in hr.items()}
    ok = m["delta=1"] < m["default"] and m["no-record"] < m["default"]
    verdict(8, ok, "HR-10 " + " ".join(f"{k}={v:.3f}" for k, v in m.items()))
    assert ok


# --- 9 ------------------------------------------------------------------------

def test_c09_metric_units():
    ids = [f"t{i}" for i in range(60)]
    checks = [
        hr_k(ids[:10], ids[:10], 10) == 1.0,
        hr_k(ids[:10], ids[10:20], 10) == 0.0,
        hr_k(ids[:5] + ids[20:25], ids[:10], 10) == 0.5,
        r10_at_50(ids[:50], ids[:10]) == 1.0,
        r10_at_50(ids[10:60], ids[:10]) == 0.0,
        r10_at_50(ids[3:53], ids[:10]) == 0.7,
        rr(ids[:4], ids[:10]) == 0.0,
        rr([ids[0], ids[3]], ids[:10]) == 1.0 / 8.5,
    ]
    v = rr([ids[0], ids[3]], ids[:10])
    ok = all(checks)
    verdict(9, ok, f"{sum(checks)}/{len(checks)} examples exact; rr({{1,4}}, N=10) = {v:.4f}")
    assert ok


# --- 10 -----------------------------------------------------------------------

def _run(argv):
    out = io.StringIO()
    with contextlib.redirect_stdout(out):
        code = main(argv)
    return code, out.getvalue()


def test_c10_determinism(tmp_path):
    def pipeline(d):
        d.mkdir()
        q = ["--query-min-len", "5", "--query-max-len", "15"]
        logs = [
            _run(["synth", "--n", "60", "--queries", "4", "--len-range", "20", "40",
                  "--query-len-range", "5", "15", "--seed", "3", "--data-out", str(d / "d.csv"),
                  "--queries-out", str(d / "q.csv"), "--hints-out", str(d / "h.csv")]),
            _run(["ingest", str(d / "d.csv"), "-o", str(d / "s.store"), "--min-len", "20", "--max-len", "40"]),
            _run(["build", str(d / "s.store"), "-o", str(d / "s.idx"), "--alpha", "0.004", "--grid-m", "3"]),
            _run(["query", "--index", str(d / "s.idx"), "--store", str(d / "s.store"),
                  "--queries", str(d / "q.csv"), *q, "--no-timings", "-o", str(d / "r.csv")]),
            _run(["eval", "--index", str(d / "s.idx"), "--store", str(d / "s.store"),
                  "--queries", str(d / "q.csv"), *q, "--report-dir", str(d / "eval"), "--no-timings"]),
            _run(["sweep", "--store", str(d / "s.store"), "--queries", str(d / "q.csv"), *q,
                  "--alpha", "0.004", "--grid-m", "3", "--xi-values", "2,5", "--k-values", "5,10",
                  "--n-values", "30,60", "--report-dir", str(d / "sweep"), "--no-timings"]),
        ]
        files = {str(p.relative_to(d)): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}
        return logs, files

    a = pipeline(tmp_path / "a")
    b = pipeline(tmp_path / "b")
    ok = a == b and all(code == 0 for code, _ in a[0])
    verdict(10, ok, f"synth/ingest/build/query/eval/sweep twice: {len(a[1])} files byte-identical" if ok
            else "outputs differ between identical runs")
    assert ok
