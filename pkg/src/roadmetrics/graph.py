"""Planar road graphs: representation, I/O, spatial queries and traversal.

Nodes carry planar coordinates in meters, edges are straight segments and
the graph is undirected. Edge ids are the canonical ``(u, v)`` tuples with
``u < v``.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

log = logging.getLogger(__name__)

Edge = tuple[int, int]
Point = tuple[float, float]


class GraphFormatError(ValueError):
    """Input bytes could not be parsed in the declared format."""


class GraphValidationError(ValueError):
    """Parsed input violates a graph invariant."""


def edge_key(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


class GeoGraph:
    """Undirected graph embedded in the plane.

    Treat instances as immutable: every operation in this package returns
    a new graph.
    """

    def __init__(self, nodes: Mapping[int, Point], edges: Iterable[Edge] = ()):
        self.nodes: dict[int, Point] = {
            int(k): (float(x), float(y)) for k, (x, y) in nodes.items()
        }
        es = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u not in self.nodes or v not in self.nodes:
                raise GraphValidationError(f"edge ({u}, {v}) references a missing node")
            if u == v:
                raise GraphValidationError(f"self-loop on node {u}")
            e = edge_key(u, v)
            if _dist(self.nodes[u], self.nodes[v]) <= 0.0:
                raise GraphValidationError(f"edge {e} has zero length")
            es.add(e)
        self.edges: frozenset[Edge] = frozenset(es)

    @classmethod
    def build(cls, nodes: Mapping[int, Point], edges: Iterable[Edge]) -> tuple["GeoGraph", int]:
        """Build a graph, dropping self-loops, duplicates and zero-length edges.

        Returns the graph and the number of dropped edges.
        """
        seen = set()
        dropped = 0
        for u, v in edges:
            u, v = int(u), int(v)
            if u not in nodes or v not in nodes:
                raise GraphValidationError(f"edge ({u}, {v}) references a missing node")
            e = edge_key(u, v)
            if u == v or e in seen or _dist(nodes[u], nodes[v]) <= 0.0:
                dropped += 1
                continue
            seen.add(e)
        return cls(nodes, seen), dropped

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GeoGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def __hash__(self):
        return hash((frozenset(self.nodes.items()), self.edges))

    def __repr__(self) -> str:
        return f"GeoGraph(|V|={len(self.nodes)}, |E|={len(self.edges)})"

    @cached_property
    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {n: [] for n in self.nodes}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        for n in adj:
            adj[n].sort()
        return adj

    @cached_property
    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def degree(self, n: int) -> int:
        return len(self.adjacency[n])

    def edge_length(self, e: Edge) -> float:
        return _dist(self.nodes[e[0]], self.nodes[e[1]])

    @cached_property
    def total_length(self) -> float:
        return math.fsum(self.edge_length(e) for e in self.sorted_edges)

    def xy(self, n: int) -> Point:
        return self.nodes[n]

    def bbox(self) -> tuple[float, float, float, float]:
        if not self.nodes:
            raise ValueError("empty graph has no bounding box")
        a = np.array(list(self.nodes.values()))
        return float(a[:, 0].min()), float(a[:, 1].min()), float(a[:, 0].max()), float(a[:, 1].max())

    def next_id(self) -> int:
        return max(self.nodes, default=-1) + 1

    @cached_property
    def segment_index(self) -> "SegmentIndex":
        return SegmentIndex(self.nodes, self.sorted_edges)


def _dist(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


# --------------------------------------------------------------------------
# Locations and paths
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GraphLocation:
    """A node, or a point at parameter ``t`` along edge ``edge`` (from edge[0])."""

    node: int | None = None
    edge: Edge | None = None
    t: float = 0.0

    def __post_init__(self):
        if (self.node is None) == (self.edge is None):
            raise ValueError("exactly one of node / edge must be given")
        if self.edge is not None and not 0.0 <= self.t <= 1.0:
            raise ValueError(f"edge parameter {self.t} outside [0, 1]")

    @classmethod
    def at_node(cls, n: int) -> "GraphLocation":
        return cls(node=n)

    @classmethod
    def on_edge(cls, e: Edge, t: float) -> "GraphLocation":
        """Edge location; collapses to a node location at t == 0 or 1."""
        if e[0] > e[1]:
            e, t = (e[1], e[0]), 1.0 - t
        if t <= 0.0:
            return cls(node=e[0])
        if t >= 1.0:
            return cls(node=e[1])
        return cls(edge=e, t=float(t))

    def xy(self, g: GeoGraph) -> Point:
        if self.node is not None:
            return g.nodes[self.node]
        (x0, y0), (x1, y1) = g.nodes[self.edge[0]], g.nodes[self.edge[1]]
        return (x0 + self.t * (x1 - x0), y0 + self.t * (y1 - y0))

    def sources(self, nodes: Mapping[int, Point]) -> dict[int, float]:
        """Travel offsets from this location to the nodes it touches."""
        if self.node is not None:
            return {self.node: 0.0}
        u, v = self.edge
        L = _dist(nodes[u], nodes[v])
        return {u: self.t * L, v: (1.0 - self.t) * L}


@dataclass(frozen=True)
class Path:
    nodes: tuple[int, ...]
    length: float

    @classmethod
    def from_nodes(cls, g: GeoGraph, seq: Iterable[int]) -> "Path":
        seq = tuple(seq)
        return cls(seq, path_length(g.nodes, seq))

    def edges(self) -> list[Edge]:
        return [edge_key(a, b) for a, b in zip(self.nodes, self.nodes[1:])]


def path_length(nodes: Mapping[int, Point], seq: Iterable[int]) -> float:
    seq = list(seq)
    return float(sum(_dist(nodes[a], nodes[b]) for a, b in zip(seq, seq[1:])))


# --------------------------------------------------------------------------
# I/O
# --------------------------------------------------------------------------

def load_graph(data: bytes | str, format: str = "json") -> GeoGraph:
    """Parse a graph from canonical JSON or a GeoJSON FeatureCollection."""
    raw = data.encode("utf-8") if isinstance(data, str) else bytes(data)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise GraphFormatError(f"invalid UTF-8 at byte offset {exc.start}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise GraphFormatError(f"{exc.msg} at byte offset {offset}") from exc

    if format == "json":
        nodes, edges = _parse_canonical(doc)
    elif format == "geojson":
        nodes, edges = _parse_geojson(doc)
    else:
        raise ValueError(f"unknown graph format {format!r}")
    g, dropped = GeoGraph.build(nodes, edges)
    if dropped:
        log.warning("dropped %d duplicate, self-loop or zero-length edges", dropped)
    return g


def _parse_canonical(doc) -> tuple[dict[int, Point], list[Edge]]:
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise GraphFormatError("expected an object with 'nodes' and 'edges' at byte offset 0")
    nodes: dict[int, Point] = {}
    for i, n in enumerate(doc["nodes"]):
        try:
            nid, x, y = int(n["id"]), float(n["x"]), float(n["y"])
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphValidationError(f"node #{i} is malformed: {n!r}") from exc
        if nid in nodes:
            raise GraphValidationError(f"duplicate node id {nid}")
        if not (math.isfinite(x) and math.isfinite(y)):
            raise GraphValidationError(f"node {nid} has non-finite coordinates")
        nodes[nid] = (x, y)
    edges = []
    for i, e in enumerate(doc["edges"]):
        if not isinstance(e, (list, tuple)) or len(e) != 2:
            raise GraphValidationError(f"edge #{i} is malformed: {e!r}")
        u, v = int(e[0]), int(e[1])
        for end in (u, v):
            if end not in nodes:
                raise GraphValidationError(f"edge #{i} ({u}, {v}) references missing node {end}")
        edges.append((u, v))
    return nodes, edges


def _parse_geojson(doc, tol: float = 1e-6) -> tuple[dict[int, Point], list[Edge]]:
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise GraphFormatError("expected a GeoJSON FeatureCollection at byte offset 0")
    nodes: dict[int, Point] = {}
    buckets: dict[tuple[int, int], list[int]] = defaultdict(list)
    edges: list[Edge] = []

    def node_for(x: float, y: float) -> int:
        cx, cy = math.floor(x / tol), math.floor(y / tol)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for nid in buckets.get((cx + dx, cy + dy), ()):
                    if _dist(nodes[nid], (x, y)) <= tol:
                        return nid
        nid = len(nodes)
        nodes[nid] = (x, y)
        buckets[(cx, cy)].append(nid)
        return nid

    for i, feat in enumerate(doc.get("features", [])):
        geom = (feat or {}).get("geometry") or {}
        if geom.get("type") == "LineString":
            lines = [geom.get("coordinates", [])]
        elif geom.get("type") == "MultiLineString":
            lines = geom.get("coordinates", [])
        else:
            raise GraphValidationError(f"feature #{i} is not a LineString")
        for line in lines:
            ids = [node_for(float(c[0]), float(c[1])) for c in line]
            edges.extend(zip(ids, ids[1:]))
    return nodes, edges


def save_graph(g: GeoGraph, format: str = "json") -> bytes:
    if format != "json":
        raise ValueError(f"cannot save graphs as {format!r}")
    doc = {
        "nodes": [{"id": n, "x": x, "y": y} for n, (x, y) in sorted(g.nodes.items())],
        "edges": [list(e) for e in g.sorted_edges],
    }
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def read_graph(path) -> GeoGraph:
    path = str(path)
    fmt = "geojson" if path.endswith(".geojson") else "json"
    with open(path, "rb") as fh:
        return load_graph(fh.read(), fmt)


def write_graph(g: GeoGraph, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_graph(g))


# --------------------------------------------------------------------------
# Structural edits
# --------------------------------------------------------------------------

def densify(g: GeoGraph, spacing: float) -> GeoGraph:
    """Split edges into equal parts no longer than ``spacing``."""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    nodes = dict(g.nodes)
    edges: list[Edge] = []
    nid = g.next_id()
    for u, v in g.sorted_edges:
        L = g.edge_length((u, v))
        k = math.ceil(L / spacing - 1e-12)
        if k <= 1:
            edges.append((u, v))
            continue
        (x0, y0), (x1, y1) = nodes[u], nodes[v]
        prev = u
        for i in range(1, k):
            f = i / k
            nodes[nid] = (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
            edges.append((prev, nid))
            prev = nid
            nid += 1
        edges.append((prev, v))
    return GeoGraph(nodes, edges)


def remove_edges(g: GeoGraph, edges: Iterable[Edge]) -> GeoGraph:
    """Drop ``edges`` and any node they leave isolated."""
    drop = {edge_key(*e) for e in edges}
    unknown = drop - g.edges
    if unknown:
        raise KeyError(f"unknown edge ids: {sorted(unknown)[:5]}")
    if not drop:
        return g
    keep = g.edges - drop
    touched = {n for e in drop for n in e}
    used = {n for e in keep for n in e}
    nodes = {n: p for n, p in g.nodes.items() if n not in touched or n in used}
    return GeoGraph(nodes, keep)


def induced(g: GeoGraph, edges: Iterable[Edge]) -> GeoGraph:
    """Subgraph made of ``edges`` and their endpoints."""
    es = [edge_key(*e) for e in edges]
    used = {n for e in es for n in e}
    return GeoGraph({n: g.nodes[n] for n in used}, es)


def components(g: GeoGraph) -> list[list[int]]:
    """Connected components as sorted node lists, ordered by smallest node."""
    seen: set[int] = set()
    out = []
    adj = g.adjacency
    for s in sorted(g.nodes):
        if s in seen:
            continue
        comp = [s]
        seen.add(s)
        stack = [s]
        while stack:
            n = stack.pop()
            for m in adj[n]:
                if m not in seen:
                    seen.add(m)
                    comp.append(m)
                    stack.append(m)
        out.append(sorted(comp))
    return out


def chains(g: GeoGraph) -> list[list[int]]:
    """Maximal runs of degree-2 nodes between features (nodes of degree != 2).

    Each chain is a node list starting and ending at a feature; the two ends
    coincide for loops. Pure cycles without features start and end at their
    smallest node.
    """
    adj = g.adjacency
    used: set[Edge] = set()
    out = []

    def walk(start: int, nxt: int) -> list[int]:
        seq = [start, nxt]
        used.add(edge_key(start, nxt))
        prev, cur = start, nxt
        while len(adj[cur]) == 2 and cur != start:
            a, b = adj[cur]
            step = b if a == prev else a
            e = edge_key(cur, step)
            if e in used:
                break
            used.add(e)
            seq.append(step)
            prev, cur = cur, step
        return seq

    for n in sorted(g.nodes):
        if len(adj[n]) == 2:
            continue
        for m in adj[n]:
            if edge_key(n, m) not in used:
                out.append(walk(n, m))
    for n in sorted(g.nodes):
        if len(adj[n]) == 2 and edge_key(n, adj[n][0]) not in used:
            out.append(walk(n, adj[n][0]))
    return out


def simplify(g: GeoGraph, tol: float = 1e-9) -> GeoGraph:
    """Merge degree-2 nodes that lie on the straight line of their neighbours."""
    nodes = dict(g.nodes)
    adj = {n: set(ns) for n, ns in g.adjacency.items()}
    for n in sorted(g.nodes):
        if len(adj[n]) != 2:
            continue
        a, b = sorted(adj[n])
        if b in adj[a]:
            continue
        pa, pb, pn = nodes[a], nodes[b], nodes[n]
        ab = _dist(pa, pb)
        if ab <= 0 or abs(_dist(pa, pn) + _dist(pn, pb) - ab) > tol * max(1.0, ab):
            continue
        adj[a].discard(n)
        adj[b].discard(n)
        adj[a].add(b)
        adj[b].add(a)
        del adj[n], nodes[n]
    edges = {edge_key(u, v) for u, ns in adj.items() for v in ns}
    return GeoGraph(nodes, edges)


# --------------------------------------------------------------------------
# Spatial index
# --------------------------------------------------------------------------

class SegmentIndex:
    """Uniform-grid index over straight segments with removable entries."""

    def __init__(self, nodes: Mapping[int, Point], edges: list[Edge], cell: float | None = None):
        self.edges = list(edges)
        self.pos = {e: i for i, e in enumerate(self.edges)}
        n = len(self.edges)
        self.a = np.empty((n, 2))
        self.b = np.empty((n, 2))
        for i, (u, v) in enumerate(self.edges):
            self.a[i] = nodes[u]
            self.b[i] = nodes[v]
        self.alive = np.ones(n, dtype=bool)
        self.n_alive = n
        if cell is None:
            lens = np.hypot(*(self.b - self.a).T) if n else np.array([1.0])
            cell = max(float(np.median(lens)), 1.0)
        self.cell = float(cell)
        self.grid: dict[tuple[int, int], list[int]] = defaultdict(list)
        lo = np.minimum(self.a, self.b) // self.cell
        hi = np.maximum(self.a, self.b) // self.cell
        for i in range(n):
            for cx in range(int(lo[i, 0]), int(hi[i, 0]) + 1):
                for cy in range(int(lo[i, 1]), int(hi[i, 1]) + 1):
                    self.grid[(cx, cy)].append(i)
        if n:
            self.lo = np.minimum(self.a, self.b).min(axis=0)
            self.hi = np.maximum(self.a, self.b).max(axis=0)

    def remove(self, e: Edge) -> None:
        i = self.pos.get(e)
        if i is not None and self.alive[i]:
            self.alive[i] = False
            self.n_alive -= 1

    def _candidates(self, p: Point, radius: float) -> np.ndarray:
        c = self.cell
        x0, x1 = int((p[0] - radius) // c), int((p[0] + radius) // c)
        y0, y1 = int((p[1] - radius) // c), int((p[1] + radius) // c)
        if (x1 - x0 + 1) * (y1 - y0 + 1) > 4 * len(self.grid):
            idx = np.arange(len(self.edges))
        else:
            found: list[int] = []
            grid = self.grid
            for cx in range(x0, x1 + 1):
                for cy in range(y0, y1 + 1):
                    cl = grid.get((cx, cy))
                    if cl:
                        found.extend(cl)
            idx = np.unique(np.array(found, dtype=np.int64))
        return idx[self.alive[idx]] if len(idx) else idx

    def _project(self, p: Point, idx: np.ndarray):
        a, b = self.a[idx], self.b[idx]
        d = b - a
        dd = np.einsum("ij,ij->i", d, d)
        t = np.clip(((p[0] - a[:, 0]) * d[:, 0] + (p[1] - a[:, 1]) * d[:, 1]) / dd, 0.0, 1.0)
        qx = a[:, 0] + t * d[:, 0]
        qy = a[:, 1] + t * d[:, 1]
        dist = np.hypot(p[0] - qx, p[1] - qy)
        return t, dist

    def within(self, p: Point, radius: float):
        """All alive segments within ``radius``: (edge indices, t, distance)."""
        idx = self._candidates(p, radius)
        if not len(idx):
            return idx, np.empty(0), np.empty(0)
        t, dist = self._project(p, idx)
        keep = dist <= radius
        return idx[keep], t[keep], dist[keep]

    def nearest(self, p: Point, radius: float | None = None) -> tuple[Edge, float, float] | None:
        """Closest alive segment as (edge, t, distance); ties by edge id then t."""
        if self.n_alive == 0:
            return None
        if radius is None:
            gap = float(np.hypot(*np.maximum(0.0, np.maximum(self.lo - p, np.asarray(p) - self.hi))))
            r = max(self.cell, gap + self.cell)
            while True:
                idx, t, dist = self.within(p, r)
                if len(idx):
                    break
                r *= 2.0
        else:
            idx, t, dist = self.within(p, radius)
            if not len(idx):
                return None
        best = dist.min()
        tie = np.flatnonzero(dist <= best + 1e-12 * max(1.0, best))
        # edges are stored in sorted order, so index order is edge-id order
        order = np.lexsort((t[tie], idx[tie]))
        j = tie[order[0]]
        return self.edges[int(idx[j])], float(t[j]), float(dist[j])


def project_point(g: GeoGraph, p: Point) -> tuple[GraphLocation, float]:
    """Closest location on ``g`` to ``p`` and its distance."""
    if not g.edges:
        if not g.nodes:
            raise ValueError("cannot project onto an empty graph")
        n = min(g.nodes, key=lambda k: (_dist(g.nodes[k], p), k))
        return GraphLocation.at_node(n), _dist(g.nodes[n], p)
    e, t, d = g.segment_index.nearest(p)
    return GraphLocation.on_edge(e, t), d


# --------------------------------------------------------------------------
# Shortest paths and traversal
# --------------------------------------------------------------------------

def dijkstra(
    nodes: Mapping[int, Point],
    adj: Mapping[int, Iterable[int]],
    sources: Mapping[int, float],
    cutoff: float = math.inf,
    target: int | None = None,
) -> dict[int, float]:
    """Label-setting shortest travel distances from weighted sources."""
    dist: dict[int, float] = {}
    heap = [(d, n) for n, d in sources.items() if d <= cutoff]
    heapq.heapify(heap)
    while heap:
        d, n = heapq.heappop(heap)
        if n in dist:
            continue
        dist[n] = d
        if n == target:
            break
        pn = nodes[n]
        for m in adj[n]:
            if m in dist:
                continue
            pm = nodes[m]
            nd = d + math.hypot(pn[0] - pm[0], pn[1] - pm[1])
            if nd <= cutoff:
                heapq.heappush(heap, (nd, m))
    return dist


def shortest_path(g: GeoGraph, a: int, b: int) -> Path | None:
    """Minimal-length path from ``a`` to ``b``.

    Among equally short paths the lexicographically smallest node sequence
    wins. Returns None when ``a`` and ``b`` are disconnected.
    """
    for n in (a, b):
        if n not in g.nodes:
            raise KeyError(f"unknown node {n}")
    seq = _shortest_sequence(g.nodes, g.adjacency, a, b)
    return None if seq is None else Path.from_nodes(g, seq)


def _shortest_sequence(nodes, adj, a: int, b: int) -> list[int] | None:
    if a == b:
        return [a]
    to_b = dijkstra(nodes, adj, {b: 0.0}, target=a)
    if a not in to_b:
        return None
    total = to_b[a]
    seq = [a]
    on_path = {a}
    cur, acc = a, 0.0
    while cur != b:
        for m in sorted(adj[cur]):
            if m not in to_b:
                continue
            w = _dist(nodes[cur], nodes[m])
            # m lies on a shortest path iff it keeps the total unchanged
            if acc + w + to_b[m] <= total * (1 + 1e-12) + 1e-12 and m not in on_path:
                seq.append(m)
                on_path.add(m)
                acc += w
                cur = m
                break
        else:  # pragma: no cover - numerical safety net
            raise RuntimeError("failed to reconstruct shortest path")
    return seq


def travel_distance(
    g_nodes: Mapping[int, Point],
    adj: Mapping[int, Iterable[int]],
    a: GraphLocation,
    b: GraphLocation,
    cutoff: float = math.inf,
) -> float:
    """Shortest travel distance between two graph locations (inf if none)."""
    direct = math.inf
    if a.edge is not None and a.edge == b.edge:
        direct = abs(a.t - b.t) * _dist(g_nodes[a.edge[0]], g_nodes[a.edge[1]])
    if a == b:
        return 0.0
    dist = dijkstra(g_nodes, adj, a.sources(g_nodes), cutoff=min(cutoff, direct))
    best = direct
    for n, off in b.sources(g_nodes).items():
        if n in dist:
            best = min(best, dist[n] + off)
    return best if best <= cutoff else math.inf


def crop_by_travel(g: GeoGraph, start: GraphLocation, budget: float, interval: float) -> list[Point]:
    """Control points every ``interval`` of travel distance up to ``budget``.

    Travel distance is the shortest along-graph distance from ``start``;
    a control point is placed wherever it equals a multiple of ``interval``,
    including the start itself.
    """
    if budget <= 0 or interval <= 0:
        raise ValueError("budget and interval must be positive")
    nodes: Mapping[int, Point] = g.nodes
    adj: Mapping[int, Iterable[int]] = g.adjacency
    start_xy = start.xy(g)
    if start.edge is not None:
        # split the start edge with a temporary node
        u, v = start.edge
        tmp = g.next_id()
        nodes = dict(g.nodes)
        nodes[tmp] = start_xy
        adj = {n: list(ns) for n, ns in g.adjacency.items()}
        adj[u] = [m for m in adj[u] if m != v] + [tmp]
        adj[v] = [m for m in adj[v] if m != u] + [tmp]
        adj[tmp] = [u, v]
        src = tmp
    else:
        src = start.node
    dist = dijkstra(nodes, adj, {src: 0.0}, cutoff=budget)
    eps = 1e-9
    out: list[Point] = []
    seen: set[tuple[int, int]] = set()

    def emit(x: float, y: float) -> None:
        key = (round(x * 1e6), round(y * 1e6))
        if key not in seen:
            seen.add(key)
            out.append((x, y))

    emit(*start_xy)
    visited: set[Edge] = set()
    for u in sorted(dist):
        for v in adj[u]:
            e = edge_key(u, v)
            if e in visited:
                continue
            visited.add(e)
            pu, pv = nodes[u], nodes[v]
            L = _dist(pu, pv)
            du, dv = dist.get(u, math.inf), dist.get(v, math.inf)
            peak = L if dv == math.inf else min(L, max(0.0, (dv + L - du) / 2.0))
            for d0, pa, pb, reach in ((du, pu, pv, peak), (dv, pv, pu, L - peak)):
                if d0 == math.inf:
                    continue
                k = math.ceil(d0 / interval - eps)
                while True:
                    travel = k * interval
                    x = travel - d0
                    if travel > budget + eps or x > reach + eps:
                        break
                    f = min(max(x / L, 0.0), 1.0)
                    emit(pa[0] + f * (pb[0] - pa[0]), pa[1] + f * (pb[1] - pa[1]))
                    k += 1
    return out


# --------------------------------------------------------------------------
# Arc-length sampling
# --------------------------------------------------------------------------

def sample_on_graph(g: GeoGraph, rng: np.random.Generator) -> GraphLocation:
    """Location drawn uniformly by arc length."""
    edges = g.sorted_edges
    if not edges:
        raise ValueError("graph has no edges to sample from")
    cum = _cumulative_lengths(g)
    r = rng.random() * cum[-1]
    i = int(np.searchsorted(cum, r, side="right"))
    i = min(i, len(edges) - 1)
    before = cum[i - 1] if i else 0.0
    L = cum[i] - before
    t = (r - before) / L if L > 0 else 0.5
    return GraphLocation.on_edge(edges[i], min(max(t, 0.0), 1.0))


def _cumulative_lengths(g: GeoGraph) -> np.ndarray:
    cache = g.__dict__.get("_cum")
    if cache is None:
        cache = np.cumsum([g.edge_length(e) for e in g.sorted_edges])
        g.__dict__["_cum"] = cache
    return cache
