"""Seeded error injectors that turn one road graph into a (ground truth, prediction) pair."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from shapely.geometry import LineString

from .graph import (
    GeoGraph,
    GraphLocation,
    _dist,
    chains,
    components,
    dijkstra,
    edge_key,
    sample_on_graph,
)

KINDS = ("interruptions", "overconnections", "node_noise", "doubled_pred", "doubled_gt", "far_false_positives")
COUNT_KINDS = {"interruptions", "overconnections", "doubled_pred", "doubled_gt"}


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str
    severity: float
    seed: int = 0
    gap: float = 20.0
    r_min: float = 50.0
    r_max: float = 300.0
    offset: float = 15.0
    disk_radius: float = 200.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.severity < 0:
            raise ValueError("severity must be non-negative")
        if self.kind in COUNT_KINDS and self.severity != int(self.severity):
            raise ValueError(f"{self.kind} severity is a count")
        if self.kind == "far_false_positives" and self.severity > 1:
            raise ValueError("far_false_positives severity is a fraction in [0, 1]")

    def as_dict(self) -> dict:
        return asdict(self)


class _Editor:
    """Mutable node/edge store used while injecting errors."""

    def __init__(self, g: GeoGraph):
        self.nodes = dict(g.nodes)
        self.adj: dict[int, set[int]] = {n: set(ns) for n, ns in g.adjacency.items()}
        self.next = g.next_id()

    def add_node(self, xy) -> int:
        n = self.next
        self.next += 1
        self.nodes[n] = (float(xy[0]), float(xy[1]))
        self.adj[n] = set()
        return n

    def add_edge(self, u: int, v: int) -> None:
        if u != v and _dist(self.nodes[u], self.nodes[v]) > 0:
            self.adj[u].add(v)
            self.adj[v].add(u)

    def remove_edge(self, u: int, v: int) -> None:
        self.adj[u].discard(v)
        self.adj[v].discard(u)

    def split(self, loc: GraphLocation) -> int:
        if loc.node is not None:
            return loc.node
        u, v = loc.edge
        (x0, y0), (x1, y1) = self.nodes[u], self.nodes[v]
        n = self.add_node((x0 + loc.t * (x1 - x0), y0 + loc.t * (y1 - y0)))
        self.remove_edge(u, v)
        self.add_edge(u, n)
        self.add_edge(n, v)
        return n

    def graph(self) -> GeoGraph:
        edges = {edge_key(u, v) for u, ns in self.adj.items() for v in ns}
        used = {n for e in edges for n in e}
        return GeoGraph({n: p for n, p in self.nodes.items() if n in used}, edges)


def _chain_lengths(nodes, seq) -> list[float]:
    cum = [0.0]
    for a, b in zip(seq, seq[1:]):
        cum.append(cum[-1] + _dist(nodes[a], nodes[b]))
    return cum


def _point_at(nodes, seq, cum, s: float) -> tuple[int, float]:
    """Index of the chain edge holding arc position ``s`` and the fraction along it."""
    for i in range(len(seq) - 1):
        if cum[i + 1] >= s or i == len(seq) - 2:
            w = cum[i + 1] - cum[i]
            return i, min(max((s - cum[i]) / w, 0.0), 1.0)
    raise ValueError("empty chain")


# --------------------------------------------------------------------------
# Injectors
# --------------------------------------------------------------------------

def inject_interruptions(g: GeoGraph, n: int, gap: float = 20.0, seed: int = 0, info: dict | None = None) -> GeoGraph:
    """Cut ``n`` gaps of length ``gap`` into roads, away from junctions and ends.

    Break centres are drawn by arc length over road stretches lying at
    least ``3 * gap`` from every junction and endpoint (including the ends
    created by earlier breaks).
    """
    if gap <= 0:
        raise ValueError("gap must be positive")
    rng = np.random.default_rng(seed)
    g0, applied = g, 0
    for _ in range(int(n)):
        ed = _Editor(g)
        spans = []
        for seq in chains(g):
            cum = _chain_lengths(g.nodes, seq)
            lo, hi = 3 * gap, cum[-1] - 3 * gap
            if hi > lo:
                spans.append((seq, cum, lo, hi))
        if not spans:
            break
        widths = np.array([hi - lo for _, _, lo, hi in spans])
        r = rng.random() * widths.sum()
        k = min(int(np.searchsorted(np.cumsum(widths), r, side="right")), len(spans) - 1)
        seq, cum, lo, hi = spans[k]
        s = lo + (r - (widths[:k].sum() if k else 0.0))
        s = min(max(s, lo), hi)
        a, b = s - gap / 2, s + gap / 2
        ia, fa = _point_at(g.nodes, seq, cum, a)
        ib, fb = _point_at(g.nodes, seq, cum, b)
        for x, y in zip(seq, seq[1:]):
            ed.remove_edge(x, y)
        # keep the chain up to a and from b onwards
        head = list(seq[: ia + 1])
        tail = list(seq[ib + 1:])
        pa = _lerp(g.nodes[seq[ia]], g.nodes[seq[ia + 1]], fa)
        pb = _lerp(g.nodes[seq[ib]], g.nodes[seq[ib + 1]], fb)
        na = head[-1] if fa <= 1e-9 else ed.add_node(pa)
        nb = tail[0] if fb >= 1 - 1e-9 else ed.add_node(pb)
        if na != head[-1]:
            head.append(na)
        if nb != (tail[0] if tail else None):
            tail.insert(0, nb)
        for x, y in zip(head, head[1:]):
            ed.add_edge(x, y)
        for x, y in zip(tail, tail[1:]):
            ed.add_edge(x, y)
        g = ed.graph()
        applied += 1
    if info is not None:
        info["applied"] = applied
        # a break on a cycle leaves its component whole
        info["components_before"] = len(components(g0))
        info["components_after"] = len(components(g))
        info["breaks_on_cycles"] = applied - (info["components_after"] - info["components_before"])
    return g


def _lerp(p, q, f):
    return (p[0] + f * (q[0] - p[0]), p[1] + f * (q[1] - p[1]))


def inject_overconnections(
    g: GeoGraph, n: int, r_min: float = 50.0, r_max: float = 300.0, seed: int = 0,
    info: dict | None = None, attempts: int = 200,
) -> GeoGraph:
    """Add ``n`` straight spurious roads between far-apart (in travel terms) points.

    Endpoints are drawn by arc length; a candidate pair must be between
    ``r_min`` and ``r_max`` apart and not already joined by a route shorter
    than ``2 * r_max``.
    """
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    rng = np.random.default_rng(seed)
    applied = 0
    for _ in range(int(n)):
        if not g.edges:
            break
        found = None
        for _ in range(attempts):
            a = sample_on_graph(g, rng)
            b = sample_on_graph(g, rng)
            pa, pb = a.xy(g), b.xy(g)
            if not r_min <= _dist(pa, pb) <= r_max:
                continue
            reach = dijkstra(g.nodes, g.adjacency, a.sources(g.nodes), cutoff=2 * r_max)
            near = a.edge is not None and a.edge == b.edge
            if not near:
                near = any(m in reach and reach[m] + off < 2 * r_max for m, off in b.sources(g.nodes).items())
            if not near:
                found = (a, b)
                break
        if found is None:
            break
        a, b = found
        ed = _Editor(g)
        # a and b never share an edge, so splitting a leaves b's edge intact
        na = ed.split(a)
        nb = ed.split(b)
        ed.add_edge(na, nb)
        g = ed.graph()
        applied += 1
    if info is not None:
        info["applied"] = applied
    return g


def inject_node_noise(g: GeoGraph, sigma: float, seed: int = 0, info: dict | None = None) -> GeoGraph:
    """Displace every node by an isotropic Gaussian offset; topology is untouched."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if info is not None:
        info["applied"] = sigma
    if sigma == 0:
        return g
    rng = np.random.default_rng(seed)
    ids = sorted(g.nodes)
    off = rng.normal(0.0, sigma, size=(len(ids), 2))
    nodes = {n: (g.nodes[n][0] + off[i, 0], g.nodes[n][1] + off[i, 1]) for i, n in enumerate(ids)}
    return GeoGraph(nodes, g.edges)


def _offset_polyline(pts: np.ndarray, offset: float) -> np.ndarray:
    """Parallel curve ``offset`` to the left (right if negative), with round joins.

    Loops that a plain vertex shift would create inside tight bends are
    trimmed, so the result never comes closer than ``offset`` to the input.
    """
    curve = LineString(pts).offset_curve(offset, quad_segs=4, join_style="round")
    if curve.geom_type == "MultiLineString":
        curve = max(curve.geoms, key=lambda c: c.length)
    return np.asarray(curve.coords, dtype=float)


def _resample_chain(nodes, seq, a: float, b: float) -> np.ndarray:
    cum = _chain_lengths(nodes, seq)
    pts = [_lerp(nodes[seq[i]], nodes[seq[i + 1]], f) for i, f in [_point_at(nodes, seq, cum, a)]]
    for k in range(1, len(seq) - 1):
        if a < cum[k] < b:
            pts.append(nodes[seq[k]])
    i, f = _point_at(nodes, seq, cum, b)
    pts.append(_lerp(nodes[seq[i]], nodes[seq[i + 1]], f))
    return np.array(pts)


def inject_doubled_roads(g: GeoGraph, n: int, offset: float = 15.0, seed: int = 0, info: dict | None = None) -> GeoGraph:
    """Add ``n`` sideways-shifted copies of roads, joined to the original road's ends.

    Roads (chains between junctions/endpoints) are picked without
    replacement with probability proportional to length. The copy follows
    the road from ``offset`` after its start to ``offset`` before its end,
    shifted by ``offset`` to a random side, and short connectors tie its
    ends to the road's end nodes.
    """
    if offset <= 0:
        raise ValueError("offset must be positive")
    rng = np.random.default_rng(seed)
    cands = []
    for seq in chains(g):
        L = _chain_lengths(g.nodes, seq)[-1]
        if L > 4 * offset and seq[0] != seq[-1]:
            cands.append((seq, L))
    k = min(int(n), len(cands))
    applied = 0
    if k:
        w = np.array([L for _, L in cands])
        picks = rng.choice(len(cands), size=k, replace=False, p=w / w.sum())
        ed = _Editor(g)
        for c in sorted(int(x) for x in picks):
            seq, L = cands[c]
            side = 1.0 if rng.random() < 0.5 else -1.0
            base = _resample_chain(g.nodes, seq, offset, L - offset)
            shifted = _offset_polyline(base, side * offset)
            ids = [ed.add_node(p) for p in shifted]
            for x, y in zip(ids, ids[1:]):
                ed.add_edge(x, y)
            ed.add_edge(seq[0], ids[0])
            ed.add_edge(ids[-1], seq[-1])
            applied += 1
        g = ed.graph()
    if info is not None:
        info["applied"] = applied
    return g


def _clip_outside(p, q, c, r) -> list[tuple[float, float]]:
    """Parameter intervals of segment p-q lying outside the disk (c, r)."""
    dx, dy = q[0] - p[0], q[1] - p[1]
    fx, fy = p[0] - c[0], p[1] - c[1]
    A = dx * dx + dy * dy
    B = 2 * (fx * dx + fy * dy)
    C = fx * fx + fy * fy - r * r
    disc = B * B - 4 * A * C
    if disc <= 0:
        return [(0.0, 1.0)]
    sq = math.sqrt(disc)
    t0, t1 = (-B - sq) / (2 * A), (-B + sq) / (2 * A)
    out = []
    if t0 > 0:
        out.append((0.0, min(t0, 1.0)))
    if t1 < 1:
        out.append((max(t1, 0.0), 1.0))
    return [(a, b) for a, b in out if b - a > 1e-12]


def remove_far_regions(g: GeoGraph, fraction: float, disk_radius: float = 200.0, seed: int = 0, info: dict | None = None) -> GeoGraph:
    """Erase all road material inside random disks until ``fraction`` of the length is gone.

    Disk centres are drawn by arc length on what is left of the graph.
    """
    if not 0 <= fraction <= 1:
        raise ValueError("fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    total = g.total_length
    disks = 0
    while g.edges and total - g.total_length < fraction * total - 1e-9:
        c = sample_on_graph(g, rng).xy(g)
        g = _erase_disk(g, c, disk_radius)
        disks += 1
    if fraction >= 1:
        g = GeoGraph({}, ())
    if info is not None:
        info["applied"] = (total - g.total_length) / total if total else 0.0
        info["disks"] = disks
    return g


def _erase_disk(g: GeoGraph, c, r: float) -> GeoGraph:
    ed = _Editor(g)
    inside = {n for n, p in g.nodes.items() if _dist(p, c) < r}
    for u, v in g.sorted_edges:
        pu, pv = g.nodes[u], g.nodes[v]
        keep = _clip_outside(pu, pv, c, r)
        if keep == [(0.0, 1.0)] and u not in inside and v not in inside:
            continue
        ed.remove_edge(u, v)
        for a, b in keep:
            na = u if a <= 1e-12 else ed.add_node(_lerp(pu, pv, a))
            nb = v if b >= 1 - 1e-12 else ed.add_node(_lerp(pu, pv, b))
            ed.add_edge(na, nb)
    return ed.graph()


# --------------------------------------------------------------------------
# Pairs
# --------------------------------------------------------------------------

@dataclass
class PerturbedPair:
    gt: GeoGraph
    pred: GeoGraph
    spec: PerturbationSpec
    achieved: float
    diagnostics: dict = field(default_factory=dict)


def make_pair(g: GeoGraph, spec: PerturbationSpec) -> PerturbedPair:
    """Copy ``g`` twice and corrupt one copy according to ``spec``.

    Doubled ground-truth roads and removed far regions corrupt the ground
    truth copy; every other kind corrupts the prediction.
    """
    info: dict = {}
    s = spec.severity
    if spec.kind == "interruptions":
        out = inject_interruptions(g, int(s), spec.gap, spec.seed, info)
    elif spec.kind == "overconnections":
        out = inject_overconnections(g, int(s), spec.r_min, spec.r_max, spec.seed, info)
    elif spec.kind == "node_noise":
        out = inject_node_noise(g, s, spec.seed, info)
    elif spec.kind in ("doubled_pred", "doubled_gt"):
        out = inject_doubled_roads(g, int(s), spec.offset, spec.seed, info)
    else:
        out = remove_far_regions(g, s, spec.disk_radius, spec.seed, info)
    achieved = info.pop("applied")
    if spec.kind in ("doubled_gt", "far_false_positives"):
        return PerturbedPair(out, g, spec, achieved, info)
    return PerturbedPair(g, out, spec, achieved, info)
