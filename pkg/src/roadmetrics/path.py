"""Path-based scores: too-long/too-short, APLS and the exclusive path score NEWP."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra as cs_dijkstra

from .graph import (
    Edge,
    GeoGraph,
    GraphLocation,
    Path,
    Point,
    SegmentIndex,
    _dist,
    densify,
    edge_key,
)


@dataclass(frozen=True)
class PathParams:
    n_pairs: int = 500
    snap_radius: float = 15.0
    correct_tol: float = 0.05
    match_radius: float = 15.0
    sample_spacing: float = 5.0
    corridor: float = 3.0
    max_failures: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be at least 1")
        if min(self.snap_radius, self.match_radius, self.sample_spacing) <= 0:
            raise ValueError("radii and spacings must be positive")
        if not 0 < self.correct_tol < 1:
            raise ValueError("correct_tol must lie in (0, 1)")


@dataclass(frozen=True)
class TLTSScore:
    correct: float
    too_long: float
    too_short: float
    infeasible: float


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    edges: frozenset[Edge]

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class PathMatch:
    segments: tuple[Segment, ...]
    path_length: float

    @property
    def edges(self) -> set[Edge]:
        return set().union(*(s.edges for s in self.segments)) if self.segments else set()

    def connectivity(self) -> float:
        """Probability that a random sub-path lies within one matched segment."""
        if self.path_length <= 0:
            return 0.0
        return sum(s.length ** 2 for s in self.segments) / self.path_length ** 2


@dataclass(frozen=True)
class NEWPScore:
    precision: float
    recall: float
    f1: float
    n_paths_gt: int
    n_paths_pred: int
    diagnostics: dict = field(default_factory=dict, compare=False)


def f1_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p > 0 and r > 0 else 0.0


# --------------------------------------------------------------------------
# Too-long / too-short and APLS
# --------------------------------------------------------------------------

class _CSGraph:
    """Sparse-matrix view of a GeoGraph for batched shortest paths."""

    def __init__(self, g: GeoGraph):
        self.g = g
        self.ids = sorted(g.nodes)
        self.index = {n: i for i, n in enumerate(self.ids)}
        rows, cols, w = [], [], []
        for u, v in g.sorted_edges:
            L = g.edge_length((u, v))
            i, j = self.index[u], self.index[v]
            rows += [i, j]
            cols += [j, i]
            w += [L, L]
        n = len(self.ids)
        self.matrix = csr_matrix((w, (rows, cols)), shape=(n, n))
        self.n_comp, self.labels = connected_components(self.matrix, directed=False)

    def distances(self, sources: list[int]) -> dict[int, np.ndarray]:
        if not sources:
            return {}
        idx = [self.index[s] for s in sources]
        d = cs_dijkstra(self.matrix, directed=False, indices=idx)
        return {s: d[k] for k, s in enumerate(sources)}


def _location_distance(cg: _CSGraph, a: GraphLocation, b: GraphLocation, rows: dict[int, np.ndarray]) -> float:
    nodes = cg.g.nodes
    best = math.inf
    if a.edge is not None and a.edge == b.edge:
        best = abs(a.t - b.t) * _dist(nodes[a.edge[0]], nodes[a.edge[1]])
    for na, oa in a.sources(nodes).items():
        row = rows[na]
        for nb, ob in b.sources(nodes).items():
            best = min(best, oa + float(row[cg.index[nb]]) + ob)
    return best


def sample_pair_lengths(gt: GeoGraph, pred: GeoGraph, p: PathParams, rng: np.random.Generator) -> list[tuple[float, float | None]]:
    """Shortest-path lengths for node pairs drawn in ``gt`` and their counterparts in ``pred``.

    Pairs disconnected in ``gt`` are redrawn (at most ``50 * n_pairs`` draws).
    The second element is None when an endpoint does not snap onto ``pred``
    or the snapped points are disconnected there.
    """
    if len(gt.nodes) < 2:
        raise ValueError("ground truth needs at least two nodes")
    cg = _CSGraph(gt)
    n = len(cg.ids)
    pairs: list[tuple[int, int]] = []
    for _ in range(50 * p.n_pairs):
        if len(pairs) == p.n_pairs:
            break
        i, j = rng.choice(n, size=2, replace=False)
        if cg.labels[i] != cg.labels[j]:
            continue
        pairs.append((cg.ids[int(i)], cg.ids[int(j)]))

    rows = cg.distances(sorted({a for a, _ in pairs}))
    gt_len = [float(rows[a][cg.index[b]]) for a, b in pairs]

    snaps: dict[int, GraphLocation | None] = {}
    if pred.edges:
        index = pred.segment_index
        for n_ in sorted({x for pr in pairs for x in pr}):
            hit = index.nearest(gt.nodes[n_], radius=p.snap_radius)
            snaps[n_] = None if hit is None else GraphLocation.on_edge(hit[0], _snap_t(hit[1]))
    pcg = _CSGraph(pred) if pred.edges else None
    src = sorted({m for a, _ in pairs if snaps.get(a) for m in snaps[a].sources(pred.nodes)})
    prow = pcg.distances(src) if pcg else {}

    out: list[tuple[float, float | None]] = []
    for (a, b), L in zip(pairs, gt_len):
        la, lb = snaps.get(a), snaps.get(b)
        if la is None or lb is None:
            out.append((L, None))
            continue
        est = _location_distance(pcg, la, lb, prow)
        out.append((L, est if math.isfinite(est) else None))
    return out


def _snap_t(t: float) -> float:
    return 0.0 if t < 1e-12 else 1.0 if t > 1 - 1e-12 else t


def classify_lengths(lengths: list[tuple[float, float | None]], tol: float) -> TLTSScore:
    counts = {"correct": 0, "too_long": 0, "too_short": 0, "infeasible": 0}
    for L, est in lengths:
        if est is None:
            counts["infeasible"] += 1
        elif abs(est - L) / L <= tol:
            counts["correct"] += 1
        elif est > L:
            counts["too_long"] += 1
        else:
            counts["too_short"] += 1
    total = len(lengths)
    if not total:
        return TLTSScore(0.0, 0.0, 0.0, 1.0)
    return TLTSScore(*(counts[k] / total for k in ("correct", "too_long", "too_short", "infeasible")))


def apls_from_lengths(lengths: list[tuple[float, float | None]]) -> float:
    if not lengths:
        return 0.0
    penalty = [1.0 if est is None else min(1.0, abs(L - est) / L) for L, est in lengths]
    return 1.0 - sum(penalty) / len(penalty)


def tlts(gt: GeoGraph, pred: GeoGraph, p: PathParams = PathParams()) -> TLTSScore:
    rng = np.random.default_rng(p.seed)
    return classify_lengths(sample_pair_lengths(gt, pred, p, rng), p.correct_tol)


def apls(gt: GeoGraph, pred: GeoGraph, p: PathParams = PathParams(), symmetric: bool = False) -> float:
    """Average path length similarity, sampling pairs in ``gt``.

    With ``symmetric`` the score is averaged with the one obtained by
    sampling in ``pred``; an unusable reverse direction counts as 0.
    """
    rng = np.random.default_rng(p.seed)
    score = apls_from_lengths(sample_pair_lengths(gt, pred, p, rng))
    if not symmetric:
        return score
    if len(pred.nodes) < 2:
        return score / 2
    rng = np.random.default_rng(p.seed)
    return (score + apls_from_lengths(sample_pair_lengths(pred, gt, p, rng))) / 2


# --------------------------------------------------------------------------
# Path matching
# --------------------------------------------------------------------------

class _Target:
    """Mutable copy of a graph whose edges get consumed by matches."""

    def __init__(self, g: GeoGraph, cell: float):
        self.nodes = g.nodes
        self.adj: dict[int, set[int]] = {n: set(ns) for n, ns in g.adjacency.items()}
        self.index = SegmentIndex(g.nodes, g.sorted_edges, cell=cell)
        self.n_edges = len(g.edges)

    def degree(self, n: int) -> int:
        return len(self.adj[n])

    def remove(self, e: Edge) -> None:
        u, v = e
        if v in self.adj[u]:
            self.adj[u].discard(v)
            self.adj[v].discard(u)
            self.index.remove(e)
            self.n_edges -= 1

    def connect(self, a: GraphLocation, b: GraphLocation, budget: float) -> tuple[float, dict[Edge, float]] | None:
        """Shortest route between two locations within ``budget``.

        Returns its length and the fraction of each edge it runs along.
        """
        if a == b:
            return 0.0, {}
        nodes = self.nodes
        best, best_end = math.inf, None
        if a.edge is not None and a.edge == b.edge:
            best = abs(a.t - b.t) * _dist(nodes[a.edge[0]], nodes[a.edge[1]])
        targets = b.sources(nodes)
        dist: dict[int, float] = {}
        prev: dict[int, int | None] = {}
        heap = [(d, n, -1) for n, d in a.sources(nodes).items()]
        heapq.heapify(heap)
        while heap:
            d, n, pr = heapq.heappop(heap)
            if n in dist:
                continue
            if d >= min(best, budget + 1e-9):
                break
            dist[n] = d
            prev[n] = None if pr < 0 else pr
            if n in targets and d + targets[n] < best:
                best, best_end = d + targets[n], n
            pn = nodes[n]
            for m in self.adj[n]:
                if m not in dist:
                    heapq.heappush(heap, (d + _dist(pn, nodes[m]), m, n))
        if best > budget + 1e-9:
            return None
        if best_end is None:
            return best, {a.edge: abs(a.t - b.t)}
        cover: dict[Edge, float] = {}
        n = best_end
        while prev.get(n) is not None:
            cover[edge_key(prev[n], n)] = 1.0
            n = prev[n]
        # partial edges holding the two locations
        for loc, node in ((a, n), (b, best_end)):
            if loc.edge is not None:
                f = loc.t if node == loc.edge[0] else 1.0 - loc.t
                cover[loc.edge] = cover.get(loc.edge, 0.0) + f
        return best, cover


def _walk(nodes, seq: tuple[int, ...], spacing: float) -> tuple[float, list[float], list[Point]]:
    cum = [0.0]
    for a, b in zip(seq, seq[1:]):
        cum.append(cum[-1] + _dist(nodes[a], nodes[b]))
    total = cum[-1]
    n = max(1, math.ceil(total / spacing - 1e-9))
    pos = [total * k / n for k in range(n + 1)]
    pts = []
    j = 0
    for s in pos:
        while j < len(seq) - 2 and cum[j + 1] < s:
            j += 1
        seg = cum[j + 1] - cum[j]
        f = 0.0 if seg <= 0 else min(1.0, max(0.0, (s - cum[j]) / seg))
        (x0, y0), (x1, y1) = nodes[seq[j]], nodes[seq[j + 1]]
        pts.append((x0 + f * (x1 - x0), y0 + f * (y1 - y0)))
    return total, pos, pts


def _match(nodes, seq: tuple[int, ...], target: _Target, p: PathParams) -> PathMatch:
    total, pos, pts = _walk(nodes, seq, p.sample_spacing)
    if target.n_edges == 0 or len(seq) < 2:
        return PathMatch((), total)
    end_tol = p.sample_spacing / 2
    segments: list[Segment] = []
    run_start = None
    run_end = 0.0
    cover: dict[Edge, float] = {}
    prev_loc = None
    prev_pos = 0.0

    def close():
        if run_start is not None:
            # an edge belongs to the match once the route runs along most of it
            used = frozenset(e for e, f in cover.items() if f >= 0.5 - 1e-9)
            segments.append(Segment(run_start, run_end, used))

    for s, xy in zip(pos, pts):
        hit = target.index.nearest(xy, radius=p.match_radius)
        loc = None
        if hit is not None:
            e, t, d = hit
            loc = GraphLocation.on_edge(e, _snap_t(t))
            # beyond a dead end: the road stops before this sample
            if loc.node is not None and target.degree(loc.node) == 1 and d > end_tol:
                loc = None
        if loc is None:
            close()
            run_start, prev_loc = None, None
            continue
        link = None
        if prev_loc is not None:
            link = target.connect(prev_loc, loc, p.corridor * (s - prev_pos))
        if link is None:
            close()
            run_start, cover = s, {}
        else:
            for e, f in link[1].items():
                cover[e] = cover.get(e, 0.0) + f
        run_end = s
        prev_loc, prev_pos = loc, s
    close()
    return PathMatch(tuple(segments), total)


def match_path(path: Path, source: GeoGraph, target: GeoGraph, p: PathParams = PathParams()) -> PathMatch:
    """Split ``path`` into segments that follow connected chains of ``target``.

    The path is sampled every ``sample_spacing``; a sample is covered when
    it projects onto ``target`` within ``match_radius``, and consecutive
    covered samples stay in one segment when their projections are linked
    by a target route no longer than ``corridor`` times their spacing.
    """
    return _match(source.nodes, path.nodes, _Target(target, p.match_radius), p)


# --------------------------------------------------------------------------
# NEWP
# --------------------------------------------------------------------------

def _exclusive_run(src: GeoGraph, tgt: GeoGraph, p: PathParams, rng: np.random.Generator, log: list | None = None):
    """Mean connectivity of mutually edge-disjoint paths sampled in ``src``."""
    nodes = src.nodes
    adj: dict[int, set[int]] = {n: set(ns) for n, ns in src.adjacency.items() if ns}
    target = _Target(tgt, p.match_radius)
    min_len = 2 * p.sample_spacing
    values: list[float] = []
    failures = 0
    slivers = 0

    def drop(u: int, v: int) -> None:
        adj[u].discard(v)
        adj[v].discard(u)
        for n in (u, v):
            if not adj[n]:
                del adj[n]

    while adj and failures < p.max_failures:
        alive = sorted(adj)
        a = alive[int(rng.integers(len(alive)))]
        dist = _settle(nodes, adj, a)
        comp = sorted(dist)
        comp_len = sum(_dist(nodes[n], nodes[m]) for n in comp for m in adj[n] if n < m)
        if len(comp) < 2 or comp_len < min_len:
            for n in comp:
                for m in list(adj.get(n, ())):
                    drop(n, m)
            slivers += 1
            continue
        others = [n for n in comp if dist[n] >= min_len]
        if not others:
            # double sweep: a tree-exact estimate of the component's diameter
            far = max(comp, key=lambda n: (dist[n], -n))
            if max(_settle(nodes, adj, far).values()) < min_len:
                for n in comp:
                    for m in list(adj.get(n, ())):
                        drop(n, m)
                slivers += 1
            else:
                failures += 1
            continue
        b = others[int(rng.integers(len(others)))]
        failures = 0
        seq = _backtrack(nodes, adj, dist, a, b)
        if target.n_edges:
            m = _match(nodes, seq, target, p)
            value = m.connectivity()
            for e in sorted(m.edges):
                target.remove(e)
        else:
            m = None
            value = 0.0
        path_edges = [edge_key(x, y) for x, y in zip(seq, seq[1:])]
        if log is not None:
            log.append((path_edges, sorted(m.edges) if m else []))
        for u, v in path_edges:
            drop(u, v)
        values.append(value)
    mean = sum(values) / len(values) if values else 0.0
    left = sum(_dist(nodes[n], nodes[m]) for n in adj for m in adj[n] if n < m)
    return mean, len(values), {"slivers": slivers, "stalled": failures >= p.max_failures, "unsampled_length": left}


def _settle(nodes, adj, a: int) -> dict[int, float]:
    dist: dict[int, float] = {}
    heap = [(0.0, a)]
    while heap:
        d, n = heapq.heappop(heap)
        if n in dist:
            continue
        dist[n] = d
        pn = nodes[n]
        for m in adj[n]:
            if m not in dist:
                pm = nodes[m]
                heapq.heappush(heap, (d + math.hypot(pn[0] - pm[0], pn[1] - pm[1]), m))
    return dist


def _backtrack(nodes, adj, dist: dict[int, float], a: int, b: int) -> tuple[int, ...]:
    seq = [b]
    cur = b
    while cur != a:
        d = dist[cur]
        best = None
        for m in sorted(adj[cur]):
            if m in dist and dist[m] + _dist(nodes[m], nodes[cur]) <= d * (1 + 1e-12) + 1e-12 and dist[m] < d:
                best = m
                break
        if best is None:  # pragma: no cover - numerical safety net
            best = min(adj[cur], key=lambda m: dist.get(m, math.inf))
        seq.append(best)
        cur = best
    return tuple(reversed(seq))


def newp(gt: GeoGraph, pred: GeoGraph, p: PathParams = PathParams(), log: dict | None = None) -> NEWPScore:
    """Path recall/precision from exclusive path sampling and matching.

    Recall samples edge-disjoint shortest paths in ``gt`` and matches each
    to the not-yet-consumed part of ``pred``; precision does the same with
    the roles exchanged. Each path scores the sum of squared matched
    segment lengths over its squared length.
    """
    g = densify(gt, p.sample_spacing) if gt.edges else gt
    h = densify(pred, p.sample_spacing) if pred.edges else pred
    ss = np.random.SeedSequence(p.seed).spawn(2)
    rec_log = [] if log is not None else None
    pre_log = [] if log is not None else None
    recall, n_gt, d_r = _exclusive_run(g, h, p, np.random.default_rng(ss[0]), rec_log)
    precision, n_pred, d_p = _exclusive_run(h, g, p, np.random.default_rng(ss[1]), pre_log)
    if log is not None:
        log["recall"] = rec_log
        log["precision"] = pre_log
    diag = {"recall": d_r, "precision": d_p}
    return NEWPScore(precision, recall, f1_score(precision, recall), n_gt, n_pred, diag)
