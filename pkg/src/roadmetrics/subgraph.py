"""Subgraph-based scores: legacy holes-and-marbles (GRAPH) and NEWG."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .graph import GeoGraph, GraphLocation, crop_by_travel, sample_on_graph
from .path import f1_score


@dataclass(frozen=True)
class SubgraphParams:
    n_starts: int = 200
    travel: float = 300.0
    interval: float = 15.0
    match_dist: float = 15.0
    seed: int = 0

    def __post_init__(self):
        if min(self.travel, self.interval, self.match_dist) <= 0:
            raise ValueError("distances must be positive")
        if self.interval > self.travel:
            raise ValueError("interval must not exceed travel")
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")


@dataclass(frozen=True)
class SubgraphScore:
    precision: float
    recall: float
    f1: float
    tp: int
    pp: int
    ap: int
    tp_pred: int


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimum-cost one-to-one assignment; ``inf`` marks forbidden pairs.

    The assignment first maximises the number of allowed pairs, then
    minimises their total cost. Returns (row, col) pairs sorted by row.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    if c.size == 0:
        return []
    if np.isnan(c).any() or np.isneginf(c).any():
        raise ValueError("cost entries must be finite or +inf")
    finite = np.isfinite(c)
    if not finite.any():
        return []
    work = c.copy()
    work[finite] -= c[finite].min()
    big = 2.0 * (work[finite].sum() + 1.0)
    work[~finite] = big
    transposed = work.shape[0] > work.shape[1]
    if transposed:
        work = work.T
    cols = _shortest_augmenting_path(work)
    pairs = [(i, int(j)) for i, j in enumerate(cols)]
    if transposed:
        pairs = [(j, i) for i, j in pairs]
    return sorted((i, j) for i, j in pairs if finite[i, j])


def _shortest_augmenting_path(c: np.ndarray) -> np.ndarray:
    """Column assigned to each row of an n x m (n <= m) finite matrix."""
    n, m = c.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    owner = np.zeros(m + 1, dtype=np.int64)  # 1-based row per column, 0 = free
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            reduced = c[i0 - 1] - u[i0] - v[1:]
            free = ~used[1:]
            better = free & (reduced < minv[1:])
            minv[1:][better] = reduced[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            cols = np.flatnonzero(used)
            u[owner[cols]] += delta
            v[cols] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    rows_to_col = np.empty(n, dtype=np.int64)
    for j in range(1, m + 1):
        if owner[j]:
            rows_to_col[owner[j] - 1] = j - 1
    return rows_to_col


def _sparse_one_to_one(a: np.ndarray, b: np.ndarray, radius: float) -> int:
    """Size of the optimal one-to-one matching between point sets within ``radius``."""
    if not len(a) or not len(b):
        return 0
    pairs = cKDTree(a).sparse_distance_matrix(cKDTree(b), radius, output_type="ndarray")
    if not len(pairs):
        return 0
    na, nb = len(a), len(b)
    ii, jj = pairs["i"].astype(np.int64), pairs["j"].astype(np.int64)
    adj = coo_matrix((np.ones(len(ii)), (ii, jj + na)), shape=(na + nb, na + nb))
    _, labels = connected_components(adj, directed=False)
    total = 0
    # independent blocks of the bipartite proximity graph are solved separately
    comp_of_pair = labels[ii]
    order = np.argsort(comp_of_pair, kind="stable")
    bounds = np.flatnonzero(np.diff(comp_of_pair[order])) + 1
    for block in np.split(order, bounds):
        bi, bj = ii[block], jj[block]
        if len(block) == 1:
            total += 1
            continue
        ri, rinv = np.unique(bi, return_inverse=True)
        cj, cinv = np.unique(bj, return_inverse=True)
        if len(ri) == 1 or len(cj) == 1:
            total += 1
            continue
        cost = np.full((len(ri), len(cj)), np.inf)
        cost[rinv, cinv] = pairs["v"][block]
        total += len(hungarian(cost))
    return total


def _points(g: GeoGraph, loc: GraphLocation, p: SubgraphParams) -> np.ndarray:
    pts = crop_by_travel(g, loc, p.travel, p.interval)
    return np.array(pts, dtype=float).reshape(-1, 2)


def _counterpart(g: GeoGraph, xy, p: SubgraphParams) -> GraphLocation | None:
    if not g.edges:
        return None
    hit = g.segment_index.nearest(xy, radius=p.match_dist)
    if hit is None:
        return None
    e, t, _ = hit
    return GraphLocation.on_edge(e, 0.0 if t < 1e-12 else 1.0 if t > 1 - 1e-12 else t)


def _rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _iteration(seed_g: GeoGraph, other: GeoGraph, rng, p: SubgraphParams):
    start = sample_on_graph(seed_g, rng)
    own = _points(seed_g, start, p)
    loc = _counterpart(other, start.xy(seed_g), p)
    theirs = _points(other, loc, p) if loc is not None else np.empty((0, 2))
    return start, own, theirs


def graph_legacy(gt: GeoGraph, pred: GeoGraph, p: SubgraphParams = SubgraphParams(), dump: list | None = None) -> SubgraphScore:
    """Holes-and-marbles: ground-truth-seeded starts, many-to-one proximity matching."""
    if not gt.edges:
        raise ValueError("ground truth has no edges")
    tp_g = tp_p = n_g = n_p = 0
    for rng in _rngs(p.seed, p.n_starts):
        start, holes, marbles = _iteration(gt, pred, rng, p)
        mg = mp = 0
        if len(holes) and len(marbles):
            d_h, _ = cKDTree(marbles).query(holes, distance_upper_bound=p.match_dist)
            d_m, _ = cKDTree(holes).query(marbles, distance_upper_bound=p.match_dist)
            mg, mp = int(np.isfinite(d_h).sum()), int(np.isfinite(d_m).sum())
        tp_g += mg
        tp_p += mp
        n_g += len(holes)
        n_p += len(marbles)
        if dump is not None:
            dump.append({"seed_graph": "gt", "start": list(start.xy(gt)), "gt_points": len(holes),
                         "pred_points": len(marbles), "matched_gt": mg, "matched_pred": mp})
    precision = tp_p / n_p if n_p else 0.0
    recall = tp_g / n_g if n_g else 0.0
    return SubgraphScore(precision, recall, f1_score(precision, recall), tp_g, n_p, n_g, tp_p)


def newg(gt: GeoGraph, pred: GeoGraph, p: SubgraphParams = SubgraphParams(), first: str = "gt", dump: list | None = None) -> SubgraphScore:
    """Starts alternate between the two graphs; control points match one-to-one.

    Iteration ``k`` seeds in ``first`` when ``k`` is even and in the other
    graph when odd. A start whose counterpart lies farther than
    ``match_dist`` still contributes its own control points, unmatched.
    """
    if not gt.edges and not pred.edges:
        raise ValueError("both graphs are empty")
    order = ("gt", "pred") if first == "gt" else ("pred", "gt")
    tp = pp = ap = 0
    for k, rng in enumerate(_rngs(p.seed, p.n_starts)):
        side = order[k % 2]
        seed_g, other = (gt, pred) if side == "gt" else (pred, gt)
        if not seed_g.edges:
            continue
        start, own, theirs = _iteration(seed_g, other, rng, p)
        g_pts, p_pts = (own, theirs) if side == "gt" else (theirs, own)
        m = _sparse_one_to_one(g_pts, p_pts, p.match_dist)
        tp += m
        pp += len(p_pts)
        ap += len(g_pts)
        if dump is not None:
            dump.append({"seed_graph": side, "start": list(start.xy(seed_g)), "gt_points": len(g_pts),
                         "pred_points": len(p_pts), "matched": m})
    precision = tp / pp if pp else 0.0
    recall = tp / ap if ap else 0.0
    return SubgraphScore(precision, recall, f1_score(precision, recall), tp, pp, ap, tp)
