import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trajgraph.dtsm import (MAX_ORACLE_LEN, best_continuation, build_match_matrix, dtsm,
                            dtsm_oracle, dtsm_score, oracle_best_from, replay,
                            step_cost_and_advance)
from trajgraph.model import Trajectory


def far_apart(n, origin=0.0):
    """n points spaced 10 apart on a line, so only identical points match."""
    return np.array([[origin + 10.0 * i, 0.0] for i in range(n)])


def fig3_pair():
    """Two 8-point trajectories sharing a 4-point run: d1[3..6] = d2[1..4] (1-based)."""
    d1 = np.array([[10.0 * i, 0.0] for i in range(8)])
    d2 = np.array([[10.0 * i + 100.0, 50.0] for i in range(8)])
    d2[0:4] = d1[2:6]
    return Trajectory("d1", d1), Trajectory("d2", d2)


def random_instance(r, max_len=8):
    n1, n2 = (int(x) for x in r.integers(1, max_len + 1, size=2))
    a = r.uniform(0, 1, size=(n1, 2))
    b = r.uniform(0, 1, size=(n2, 2))
    return a, b


# --- match matrix ----------------------------------------------------------

def test_match_matrix_examples():
    x = far_apart(5)
    A = build_match_matrix(x, x, 1.0)
    assert (np.diag(A.entries) == 1).all()
    assert A.entries.sum() == 5 - 20
    B = build_match_matrix(x, far_apart(5, 1000.0), 1.0)
    assert (B.entries == -1).all()
    d1, d2 = fig3_pair()
    band = build_match_matrix(d1, d2, 1.0).entries
    assert [(i, j) for i, j in zip(*np.nonzero(band > 0))] == [(2, 0), (3, 1), (4, 2), (5, 3)]
    with pytest.raises(ValueError):
        build_match_matrix(x, x, 0.0)


def test_match_matrix_threshold_is_inclusive():
    A = build_match_matrix([(0.0, 0.0)], [(3.0, 4.0)], 5.0)
    assert A[0, 0] == 1


# --- step rules --------------------------------------------------------------

def test_step_all_similar_is_c1():
    A = np.ones((4, 4), dtype=np.int8)
    assert step_cost_and_advance((0, 0), A) == [(2, (1, 1))]


def test_step_c2_c3_c4_c5_c6():
    A = -np.ones((3, 3), dtype=np.int8)
    A[0, 1] = 1
    assert step_cost_and_advance((0, 0), A) == [(3, (0, 1))]            # C2
    A = -np.ones((3, 3), dtype=np.int8)
    A[1, 0] = 1
    assert step_cost_and_advance((0, 0), A) == [(3, (1, 0))]            # C3
    A[0, 1] = 1
    assert sorted(step_cost_and_advance((0, 0), A)) == [(3, (0, 1)), (3, (1, 0))]  # C4
    A = -np.ones((3, 3), dtype=np.int8)
    A[1, 1] = 1
    assert step_cost_and_advance((0, 0), A) == [(2, (1, 1))]            # C5
    A = -np.ones((3, 3), dtype=np.int8)
    assert sorted(step_cost_and_advance((0, 0), A)) == [(-1, (0, 1)), (-1, (1, 0))]  # C6


def test_step_c1_charges_dissimilar_successor():
    A = np.array([[1, -1], [-1, -1]], dtype=np.int8)
    assert step_cost_and_advance((0, 0), A) == [(-2, (1, 1))]


def test_step_at_corner_has_no_successor():
    A = np.ones((2, 2), dtype=np.int8)
    assert step_cost_and_advance((1, 1), A) == []


def test_best_continuation_examples():
    A = np.ones((1, 1), dtype=np.int8)
    assert best_continuation(0, 0, A) == 0
    for L in range(1, 7):
        A = -np.ones((L, L), dtype=np.int8)
        np.fill_diagonal(A, 1)
        assert best_continuation(0, 0, A) == 2 * (L - 1)
        assert oracle_best_from(A, 0, 0) - 2 == 2 * (L - 1)
    A = -np.ones((5, 5), dtype=np.int8)
    A[0, 0] = 1
    assert best_continuation(0, 0, A) == 0


# --- dtsm ----------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_identity_scores_2n(n):
    x = far_apart(n)
    r = dtsm(x, x, 1.0)
    assert r.score == 2 * n
    assert dtsm_oracle(x, x, 1.0).score == 2 * n


def test_all_dissimilar_scores_zero():
    r = dtsm(far_apart(4), far_apart(6, 1000.0), 1.0)
    assert r.score == 0 and r.pair is None
    assert dtsm_oracle(far_apart(4), far_apart(6, 1000.0), 1.0).score == 0


def test_fig3_shape():
    d1, d2 = fig3_pair()
    r = dtsm(d1, d2, 1.0)
    assert r.score == 8
    a, b = r.pair
    assert (a.traj_id, a.start, a.end) == ("d1", 3, 6)
    assert (b.traj_id, b.start, b.end) == ("d2", 1, 4)
    o = dtsm_oracle(d1, d2, 1.0)
    assert o.score == 8 and o.pair == r.pair


def test_replay_validates_path():
    d1, d2 = fig3_pair()
    r = dtsm(d1, d2, 1.0)
    A = build_match_matrix(d1, d2, 1.0)
    assert replay(r.path, A) == r.score
    with pytest.raises(ValueError):
        replay([(2, 0), (4, 2)], A)
    with pytest.raises(ValueError):
        replay([(0, 0)], A)


def test_oracle_guard():
    x = far_apart(MAX_ORACLE_LEN + 1)
    with pytest.raises(ValueError):
        dtsm_oracle(x, x, 1.0)


def test_dtsm_matches_oracle_random():
    r = np.random.default_rng(11)
    for _ in range(300):
        a, b = random_instance(r)
        alpha = float(r.uniform(0.3, 0.6))
        got, want = dtsm(a, b, alpha), dtsm_oracle(a, b, alpha)
        assert got.score == want.score
        assert got.pair == want.pair
        assert dtsm_score(a, b, alpha) == got.score
        if got.pair is not None:
            assert replay(got.path, build_match_matrix(a, b, alpha)) == got.score


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.05, 0.6), st.floats(0.0, 0.4))
def test_alpha_monotone(seed, alpha, bump):
    a, b = random_instance(np.random.default_rng(seed))
    assert dtsm_score(a, b, alpha + bump) >= dtsm_score(a, b, alpha) >= 0


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.2, 0.7))
def test_pruning_soundness(seed, alpha):
    a, b = random_instance(np.random.default_rng(seed), 7)
    A = build_match_matrix(a, b, alpha)
    n1, n2 = A.shape
    for i in range(n1):
        for j in range(n2):
            if not A.similar(i, j):
                assert oracle_best_from(A, i, j) <= oracle_best_from(A, i + 1, j + 1)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.2, 0.7))
def test_score_is_max_over_similar_starts(seed, alpha):
    a, b = random_instance(np.random.default_rng(seed))
    A = build_match_matrix(a, b, alpha)
    n1, n2 = A.shape
    starts = [2 + best_continuation(i, j, A) for i in range(n1) for j in range(n2) if A.similar(i, j)]
    assert dtsm_score(a, b, alpha) == max(starts, default=0)


def test_dtsm_rejects_bad_input():
    with pytest.raises(ValueError):
        dtsm(np.empty((0, 2)), far_apart(2), 1.0)
    with pytest.raises(ValueError):
        dtsm(far_apart(2), far_apart(2), 0.0)


def test_runtime_grows_subquartic():
    r = np.random.default_rng(5)
    dtsm_score(r.uniform(size=(8, 2)), r.uniform(size=(8, 2)), 0.01)
    times = []
    for n in (100, 200, 400):
        pairs = [(r.uniform(size=(n, 2)), r.uniform(size=(n, 2))) for _ in range(5)]
        t0 = time.perf_counter()
        for _ in range(3):
            for a, b in pairs:
                dtsm_score(a, b, 0.02)
        times.append(time.perf_counter() - t0)
    slope = np.polyfit(np.log([100, 200, 400]), np.log(times), 1)[0]
    assert slope < 3
