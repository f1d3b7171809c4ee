"""Slow, independent reference implementations used only by the tests."""

import math
from functools import lru_cache


def pdist(a, b):
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return math.sqrt(dx * dx + dy * dy)


def dtw_paths(a, b):
    """Minimum cost over every warping path, enumerated explicitly."""
    n, m = len(a), len(b)
    best = math.inf
    stack = [(0, 0, pdist(a[0], b[0]))]
    while stack:
        i, j, acc = stack.pop()
        if i == n - 1 and j == m - 1:
            best = min(best, acc)
            continue
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            u, v = i + di, j + dj
            if u < n and v < m:
                stack.append((u, v, acc + pdist(a[u], b[v])))
    return best


def edr_scripts(a, b, eps):
    """Minimum over every edit script (no memo)."""
    def match(p, q):
        return abs(p[0] - q[0]) <= eps and abs(p[1] - q[1]) <= eps

    def go(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        return min(go(i + 1, j + 1) + (0 if match(a[i], b[j]) else 1),
                   go(i + 1, j) + 1, go(i, j + 1) + 1)
    return go(0, 0)


def erp_alignments(a, b, g):
    def go(i, j):
        if i == len(a):
            return sum(pdist(q, g) for q in b[j:])
        if j == len(b):
            return sum(pdist(p, g) for p in a[i:])
        return min(go(i + 1, j + 1) + pdist(a[i], b[j]),
                   go(i + 1, j) + pdist(a[i], g), go(i, j + 1) + pdist(b[j], g))
    return go(0, 0)


def dtw_table(a, b):
    n, m = len(a), len(b)
    D = [[math.inf] * (m + 1) for _ in range(n + 1)]
    D[0][0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            D[i][j] = pdist(a[i - 1], b[j - 1]) + min(D[i - 1][j], D[i][j - 1], D[i - 1][j - 1])
    return D[n][m]


def edr_table(a, b, eps):
    @lru_cache(None)
    def go(i, j):
        if i == 0:
            return float(j)
        if j == 0:
            return float(i)
        same = abs(a[i - 1][0] - b[j - 1][0]) <= eps and abs(a[i - 1][1] - b[j - 1][1]) <= eps
        return min(go(i - 1, j - 1) + (0.0 if same else 1.0), go(i - 1, j) + 1.0, go(i, j - 1) + 1.0)
    return go(len(a), len(b))


def erp_table(a, b, g):
    n, m = len(a), len(b)
    D = [[0.0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        D[i][0] = D[i - 1][0] + pdist(a[i - 1], g)
    for j in range(1, m + 1):
        D[0][j] = D[0][j - 1] + pdist(b[j - 1], g)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            D[i][j] = min(D[i - 1][j - 1] + pdist(a[i - 1], b[j - 1]),
                          D[i - 1][j] + pdist(a[i - 1], g), D[i][j - 1] + pdist(b[j - 1], g))
    return D[n][m]


def naive_exact_s(q, p, dist):
    """Score every slice p[a..b] from scratch; first minimum in (a, b) order."""
    best = (math.inf, -1, -1)
    for a in range(len(p)):
        for b in range(a, len(p)):
            d = dist(q, p[a:b + 1])
            if d < best[0]:
                best = (d, a, b)
    return best


def check_index_invariants(bundle, store, config):
    """Assert every structural rule of a built index; returns nothing."""
    from trajgraph.spatial import Grid, compute_mbr, dataset_bounds

    n = len(store)
    gari, cndi = bundle.gari, bundle.cndi
    assert len(gari.nodes) <= config.grid_m ** 2
    assert len(set(gari.nodes)) == len(gari.nodes)
    gset = set(gari.nodes)
    grid = Grid(dataset_bounds(store), config.grid_m)
    for node in gari.nodes:
        nbrs = gari.neighbors(node)
        assert node not in nbrs
        assert set(nbrs) <= gset
        assert len(set(nbrs)) == len(nbrs)
        m = len(gari.nodes) - 1
        top, mid, bot = (m // 3 + (m % 3 >= 1), m // 3, m // 3 + (m % 3 >= 2))
        quota = dict(zip(("similar", "random", "dissimilar"), config.gari_neighbor_counts))
        sizes = {"similar": top, "random": mid, "dissimilar": bot}
        for tag in quota:
            got = sum(1 for _, t in gari.adj[node] if t == tag)
            assert got == min(quota[tag], sizes[tag])
    occupied = {grid.cell_of(*compute_mbr(t).center) for t in store}
    assert len(gari.nodes) == len(occupied)

    assert cndi.nodes == list(store.ids)
    n_sim, n_rand = config.neighbor_split(n)
    for node in cndi.nodes:
        edges = cndi.adj[node]
        nbrs = [t for t, _ in edges]
        assert len(nbrs) == min(config.xi, n - 1)
        assert node not in nbrs
        assert len(set(nbrs)) == len(nbrs)
        assert sum(1 for _, t in edges if t == "similar") == n_sim
        assert sum(1 for _, t in edges if t == "random") == n_rand
