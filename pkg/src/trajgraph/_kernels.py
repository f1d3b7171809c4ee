"""Compiled inner loops.

Everything here operates on plain ``(n, 2)`` float64 arrays. Distance kind
codes: 0 planar Euclidean, 1 haversine metres. Metric codes: 0 DTW, 1 EDR,
2 ERP. No fastmath: results must be bit-reproducible across code paths.
"""

import math

import numpy as np
from numba import njit

EARTH_RADIUS_M = 6371008.8

DIST_CODES = {"euclidean": 0, "haversine": 1}
METRIC_CODES = {"dtw": 0, "edr": 1, "erp": 2}


@njit(cache=True)
def point_dist(ax, ay, bx, by, kind):
    if kind == 0:
        dx = ax - bx
        dy = ay - by
        return math.sqrt(dx * dx + dy * dy)
    p1 = math.radians(ay)
    p2 = math.radians(by)
    dp = p2 - p1
    dl = math.radians(bx - ax)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


@njit(cache=True)
def cross_dist(x1, x2, kind):
    n1 = x1.shape[0]
    n2 = x2.shape[0]
    out = np.empty((n1, n2))
    for i in range(n1):
        for j in range(n2):
            out[i, j] = point_dist(x1[i, 0], x1[i, 1], x2[j, 0], x2[j, 1], kind)
    return out


@njit(cache=True)
def match_matrix(x1, x2, alpha, kind):
    n1 = x1.shape[0]
    n2 = x2.shape[0]
    out = np.empty((n1, n2), dtype=np.int8)
    for i in range(n1):
        for j in range(n2):
            d = point_dist(x1[i, 0], x1[i, 1], x2[j, 0], x2[j, 1], kind)
            out[i, j] = 1 if d <= alpha else -1
    return out


# --- full-trajectory distances ------------------------------------------

@njit(cache=True)
def dtw(a, b, kind):
    n = a.shape[0]
    m = b.shape[0]
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d = point_dist(a[i - 1, 0], a[i - 1, 1], b[j - 1, 0], b[j - 1, 1], kind)
            D[i, j] = d + min(D[i - 1, j], D[i, j - 1], D[i - 1, j - 1])
    return D[n, m]


@njit(cache=True)
def edr(a, b, eps):
    n = a.shape[0]
    m = b.shape[0]
    D = np.empty((n + 1, m + 1))
    for i in range(n + 1):
        D[i, 0] = i
    for j in range(m + 1):
        D[0, j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            same = (abs(a[i - 1, 0] - b[j - 1, 0]) <= eps
                    and abs(a[i - 1, 1] - b[j - 1, 1]) <= eps)
            sub = 0.0 if same else 1.0
            D[i, j] = min(D[i - 1, j - 1] + sub, D[i - 1, j] + 1.0, D[i, j - 1] + 1.0)
    return D[n, m]


@njit(cache=True)
def erp(a, b, gx, gy, kind):
    n = a.shape[0]
    m = b.shape[0]
    D = np.empty((n + 1, m + 1))
    D[0, 0] = 0.0
    for i in range(1, n + 1):
        D[i, 0] = D[i - 1, 0] + point_dist(a[i - 1, 0], a[i - 1, 1], gx, gy, kind)
    for j in range(1, m + 1):
        D[0, j] = D[0, j - 1] + point_dist(b[j - 1, 0], b[j - 1, 1], gx, gy, kind)
    for i in range(1, n + 1):
        ga = point_dist(a[i - 1, 0], a[i - 1, 1], gx, gy, kind)
        for j in range(1, m + 1):
            gb = point_dist(b[j - 1, 0], b[j - 1, 1], gx, gy, kind)
            d = point_dist(a[i - 1, 0], a[i - 1, 1], b[j - 1, 0], b[j - 1, 1], kind)
            D[i, j] = min(D[i - 1, j - 1] + d, D[i - 1, j] + ga, D[i, j - 1] + gb)
    return D[n, m]


# --- exact representative subtrajectory search ---------------------------

@njit(cache=True)
def exact_s(q, p, metric, eps, gx, gy, kind):
    """Best slice of ``p`` against query ``q``: (distance, start, end), 0-based.

    Rows are query points (with a padded row 0), columns are slice points.
    For each start ``a`` the column is extended over ``b``; values equal a
    from-scratch DP on ``p[a:b+1]`` bit for bit. Extension from ``a`` stops
    once every cell of the current column is >= the best distance found:
    all costs are non-negative, so no later end can win (ties go to the
    earlier start/end anyway).
    """
    m = q.shape[0]
    n = p.shape[0]
    dm = np.empty((m, n))
    for i in range(m):
        for j in range(n):
            dm[i, j] = point_dist(q[i, 0], q[i, 1], p[j, 0], p[j, 1], kind)
    gq = np.zeros(m)
    gp = np.zeros(n)
    if metric == 2:
        for i in range(m):
            gq[i] = point_dist(q[i, 0], q[i, 1], gx, gy, kind)
        for j in range(n):
            gp[j] = point_dist(p[j, 0], p[j, 1], gx, gy, kind)
    match = np.zeros((m, n), dtype=np.bool_)
    if metric == 1:
        for i in range(m):
            for j in range(n):
                match[i, j] = (abs(q[i, 0] - p[j, 0]) <= eps
                               and abs(q[i, 1] - p[j, 1]) <= eps)

    prev = np.empty(m + 1)
    cur = np.empty(m + 1)
    best = np.inf
    ba = -1
    bb = -1
    for a in range(n):
        # column 0 of the DP (empty slice prefix)
        if metric == 0:
            prev[0] = 0.0
            for i in range(1, m + 1):
                prev[i] = np.inf
        elif metric == 1:
            for i in range(m + 1):
                prev[i] = i
        else:
            prev[0] = 0.0
            for i in range(1, m + 1):
                prev[i] = prev[i - 1] + gq[i - 1]
        for b in range(a, n):
            if metric == 0:
                cur[0] = np.inf
                for i in range(1, m + 1):
                    cur[i] = dm[i - 1, b] + min(cur[i - 1], prev[i], prev[i - 1])
            elif metric == 1:
                cur[0] = prev[0] + 1.0
                for i in range(1, m + 1):
                    sub = 0.0 if match[i - 1, b] else 1.0
                    cur[i] = min(prev[i - 1] + sub, prev[i] + 1.0, cur[i - 1] + 1.0)
            else:
                cur[0] = prev[0] + gp[b]
                for i in range(1, m + 1):
                    cur[i] = min(prev[i - 1] + dm[i - 1, b], prev[i] + gp[b], cur[i - 1] + gq[i - 1])
            val = cur[m]
            if val < best:
                best = val
                ba = a
                bb = b
            lo = cur[0]
            for i in range(1, m + 1):
                if cur[i] < lo:
                    lo = cur[i]
            if lo >= best:
                break
            tmp = prev
            prev = cur
            cur = tmp
    return best, ba, bb


@njit(cache=True)
def exact_s_many(q, coords, offsets, idx, metric, eps, gx, gy, kind):
    k = idx.shape[0]
    dist = np.empty(k)
    starts = np.empty(k, dtype=np.int64)
    ends = np.empty(k, dtype=np.int64)
    for t in range(k):
        i = idx[t]
        p = coords[offsets[i]:offsets[i + 1]]
        d, a, b = exact_s(q, p, metric, eps, gx, gy, kind)
        dist[t] = d
        starts[t] = a
        ends[t] = b
    return dist, starts, ends


# --- DTSM -----------------------------------------------------------------
# State (a, b) means the pair (a, b) has already been charged. From a state:
#   similar (a,b)                   -> charge (a+1,b+1), move there        [C1]
#   else (a,b+1) / (a+1,b) similar  -> +3, move to whichever is similar    [C2-C4]
#   else (a+1,b+1) similar          -> +2, move diagonally                 [C5]
#   else                            -> -1, move to (a,b+1) or (a+1,b)      [C6]
# A move whose target is out of range contributes nothing. The value of a
# state is the best total of any continuation, or 0 for stopping there.
# Choice codes: 0 stop, 1 diagonal, 2 advance d2, 3 advance d1.

@njit(cache=True)
def dtsm_tables(sim):
    n1, n2 = sim.shape
    V = np.zeros((n1, n2), dtype=np.int64)
    EK = np.empty((n1, n2), dtype=np.int64)
    EL = np.empty((n1, n2), dtype=np.int64)
    CH = np.zeros((n1, n2), dtype=np.int8)
    for a in range(n1 - 1, -1, -1):
        for b in range(n2 - 1, -1, -1):
            bv = 0
            bk = a
            bl = b
            bc = 0
            for c in range(1, 4):
                if c == 1:
                    na = a + 1
                    nb = b + 1
                elif c == 2:
                    na = a
                    nb = b + 1
                else:
                    na = a + 1
                    nb = b
                if na >= n1 or nb >= n2:
                    continue
                s_t = sim[na, nb] > 0
                if sim[a, b] > 0:
                    if c != 1:
                        continue
                    cost = 2 if s_t else -2
                else:
                    s12 = b + 1 < n2 and sim[a, b + 1] > 0
                    s21 = a + 1 < n1 and sim[a + 1, b] > 0
                    if s12 or s21:
                        if c == 1 or not s_t:
                            continue
                        cost = 3
                    elif a + 1 < n1 and b + 1 < n2 and sim[a + 1, b + 1] > 0:
                        if c != 1:
                            continue
                        cost = 2
                    else:
                        if c == 1:
                            continue
                        cost = -1
                v = cost + V[na, nb]
                ek = EK[na, nb]
                el = EL[na, nb]
                if v > bv or (v == bv and (ek < bk or (ek == bk and el < bl))):
                    bv = v
                    bk = ek
                    bl = el
                    bc = c
            V[a, b] = bv
            EK[a, b] = bk
            EL[a, b] = bl
            CH[a, b] = bc
    return V, EK, EL, CH


@njit(cache=True)
def dtsm_best(sim):
    """(score, i, j, k, l, V, CH); score 0 and i = -1 when nothing is similar."""
    V, EK, EL, CH = dtsm_tables(sim)
    n1, n2 = sim.shape
    best = 0
    bi = -1
    bj = -1
    for i in range(n1):
        for j in range(n2):
            if sim[i, j] <= 0:
                continue
            s = 2 + V[i, j]
            if s > best:
                best = s
                bi = i
                bj = j
    if bi < 0:
        return 0, -1, -1, -1, -1, V, CH
    return best, bi, bj, EK[bi, bj], EL[bi, bj], V, CH


@njit(cache=True)
def dtsm_score(x1, x2, alpha, kind):
    """S_max only, with two rolling rows of values and similarity flags."""
    n1 = x1.shape[0]
    n2 = x2.shape[0]
    v_next = np.zeros(n2 + 1, dtype=np.int64)
    v_cur = np.zeros(n2 + 1, dtype=np.int64)
    s_next = np.zeros(n2 + 1, dtype=np.bool_)
    s_cur = np.zeros(n2 + 1, dtype=np.bool_)
    best = 0
    for a in range(n1 - 1, -1, -1):
        for b in range(n2):
            s_cur[b] = point_dist(x1[a, 0], x1[a, 1], x2[b, 0], x2[b, 1], kind) <= alpha
        s_cur[n2] = False
        has_next = a + 1 < n1
        for b in range(n2 - 1, -1, -1):
            bv = 0
            right = b + 1 < n2
            if s_cur[b]:
                if has_next and right:
                    c = 2 if s_next[b + 1] else -2
                    bv = max(bv, c + v_next[b + 1])
            else:
                s12 = s_cur[b + 1]
                s21 = has_next and s_next[b]
                if s12 or s21:
                    if s12:
                        bv = max(bv, 3 + v_cur[b + 1])
                    if s21:
                        bv = max(bv, 3 + v_next[b])
                elif has_next and right and s_next[b + 1]:
                    bv = max(bv, 2 + v_next[b + 1])
                else:
                    if right:
                        bv = max(bv, -1 + v_cur[b + 1])
                    if has_next:
                        bv = max(bv, -1 + v_next[b])
            v_cur[b] = bv
            if s_cur[b] and 2 + bv > best:
                best = 2 + bv
        v_cur[n2] = 0
        tmp = v_next
        v_next = v_cur
        v_cur = tmp
        tmp2 = s_next
        s_next = s_cur
        s_cur = tmp2
    return best


@njit(cache=True)
def mbr_gap(x1, x2):
    ax0 = x1[:, 0].min()
    ax1 = x1[:, 0].max()
    ay0 = x1[:, 1].min()
    ay1 = x1[:, 1].max()
    bx0 = x2[:, 0].min()
    bx1 = x2[:, 0].max()
    by0 = x2[:, 1].min()
    by1 = x2[:, 1].max()
    dx = max(0.0, max(ax0 - bx1, bx0 - ax1))
    dy = max(0.0, max(ay0 - by1, by0 - ay1))
    return math.sqrt(dx * dx + dy * dy)


@njit(cache=True)
def dtsm_many(coords, offsets, i, idx, alpha, kind):
    x1 = coords[offsets[i]:offsets[i + 1]]
    out = np.zeros(idx.shape[0], dtype=np.int64)
    for t in range(idx.shape[0]):
        j = idx[t]
        x2 = coords[offsets[j]:offsets[j + 1]]
        # planar MBR gap > alpha rules out every similar pair
        if kind == 0 and mbr_gap(x1, x2) > alpha:
            continue
        out[t] = dtsm_score(x1, x2, alpha, kind)
    return out
