"""Junction-based scores: the legacy degree-fraction score and NEWJ."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .graph import GeoGraph, GraphLocation, _dist, chains
from .path import f1_score


@dataclass(frozen=True)
class Feature:
    node: int
    position: tuple[float, float]
    degree: int

    @property
    def kind(self) -> str:
        return "endpoint" if self.degree == 1 else "junction"


@dataclass(frozen=True)
class JunctionParams:
    d_max: float = 25.0
    alpha: float | None = None
    angle_tol: float = 45.0

    def __post_init__(self):
        if self.d_max <= 0:
            raise ValueError("d_max must be positive")
        if self.alpha is not None and self.alpha < 0:
            raise ValueError("alpha must be non-negative")

    @property
    def weight(self) -> float:
        return 2.0 / self.d_max if self.alpha is None else self.alpha


@dataclass(frozen=True)
class LegacyJunctionScore:
    f_correct: float
    f_error: float
    f1: float


@dataclass(frozen=True)
class NEWJScore:
    precision: float
    recall: float
    f1: float
    tp: int
    pp: int
    ap: int


@dataclass(frozen=True)
class JunctionMatch:
    gt: object
    pred: object
    cost: float
    kind: str
    o_gt: int
    o_pred: int

    def as_dict(self) -> dict:
        def ref(x):
            return x if isinstance(x, int) else {"edge": list(x[0]), "t": x[1]}

        return {"gt": ref(self.gt), "pred": ref(self.pred), "cost": self.cost, "kind": self.kind}


def extract_features(g: GeoGraph, include_endpoints: bool) -> list[Feature]:
    """Junctions (degree >= 3) and optionally endpoints (degree 1).

    Degree-2 nodes only outline road curvature, so they never qualify; this
    is the same as contracting degree-2 chains first.
    """
    out = []
    for n in sorted(g.nodes):
        d = g.degree(n)
        if d >= 3 or (include_endpoints and d == 1):
            out.append(Feature(n, g.nodes[n], d))
    return out


def _close_pairs(a: list[Feature], b: list[Feature], radius: float) -> list[tuple[float, int, int]]:
    if not a or not b:
        return []
    ta = cKDTree(np.array([f.position for f in a]))
    tb = cKDTree(np.array([f.position for f in b]))
    sdm = ta.sparse_distance_matrix(tb, radius, output_type="ndarray")
    out = []
    for i, j, _ in sdm:
        out.append((_dist(a[i].position, b[j].position), int(i), int(j)))
    return out


# --------------------------------------------------------------------------
# Legacy junction score
# --------------------------------------------------------------------------

def _arm_directions(g: GeoGraph, reach: float) -> dict[int, list[tuple[float, float]]]:
    """Unit direction of every road leaving each junction.

    Directions point at the location ``min(reach, L / 2)`` along the chain,
    which keeps them stable when the far end of a road is cut or displaced.
    """
    arms: dict[int, list[tuple[float, float]]] = {}
    nodes = g.nodes
    for ch in chains(g):
        for seq in (ch, ch[::-1]):
            j = seq[0]
            if g.degree(j) < 3:
                continue
            L = sum(_dist(nodes[a], nodes[b]) for a, b in zip(seq, seq[1:]))
            target = min(reach, L / 2)
            acc = 0.0
            pt = nodes[seq[-1]]
            for a, b in zip(seq, seq[1:]):
                w = _dist(nodes[a], nodes[b])
                if acc + w >= target:
                    f = (target - acc) / w
                    pt = (nodes[a][0] + f * (nodes[b][0] - nodes[a][0]), nodes[a][1] + f * (nodes[b][1] - nodes[a][1]))
                    break
                acc += w
            dx, dy = pt[0] - nodes[j][0], pt[1] - nodes[j][1]
            r = math.hypot(dx, dy) or 1.0
            arms.setdefault(j, []).append((dx / r, dy / r))
    return arms


def _pair_arms(a: list[tuple[float, float]], b: list[tuple[float, float]], tol_deg: float) -> int:
    cands = []
    for i, (ax, ay) in enumerate(a):
        for j, (bx, by) in enumerate(b):
            ang = math.degrees(math.acos(max(-1.0, min(1.0, ax * bx + ay * by))))
            if ang <= tol_deg:
                cands.append((ang, i, j))
    cands.sort()
    used_a, used_b = set(), set()
    for _, i, j in cands:
        if i not in used_a and j not in used_b:
            used_a.add(i)
            used_b.add(j)
    return len(used_a)


def junct_legacy(gt: GeoGraph, pred: GeoGraph, p: JunctionParams = JunctionParams()) -> LegacyJunctionScore:
    """Greedy junction matching with per-junction captured-road fractions."""
    fg = extract_features(gt, include_endpoints=False)
    fp = extract_features(pred, include_endpoints=False)
    match: dict[int, int] = {}
    taken: set[int] = set()
    for _, i, j in sorted((d, fg[i].node, fp[j].node) for d, i, j in _close_pairs(fg, fp, p.d_max)):
        if i not in match and j not in taken:
            match[i] = j
            taken.add(j)
    arms_g = _arm_directions(gt, p.d_max)
    arms_p = _arm_directions(pred, p.d_max)
    n_correct = 0.0
    n_error = 0.0
    matched_pred: dict[int, int] = {}
    for f in fg:
        j = match.get(f.node)
        if j is None:
            continue
        k = _pair_arms(arms_g[f.node], arms_p[j], p.angle_tol)
        n_correct += k / f.degree
        matched_pred[j] = k
    for f in fp:
        k = matched_pred.get(f.node)
        n_error += 1.0 if k is None else (f.degree - k) / f.degree
    f_correct = n_correct / len(fg) if fg else 0.0
    f_error = n_error / (n_error + n_correct) if n_error + n_correct > 0 else 0.0
    return LegacyJunctionScore(f_correct, f_error, f1_score(f_correct, 1.0 - f_error))


# --------------------------------------------------------------------------
# NEWJ
# --------------------------------------------------------------------------

def _edge_point(g: GeoGraph, xy, radius: float):
    """Closest point of ``g`` to ``xy`` if it lies on a road (not on a feature)."""
    if not g.edges:
        return None
    hit = g.segment_index.nearest(xy, radius=radius)
    if hit is None:
        return None
    e, t, d = hit
    loc = GraphLocation.on_edge(e, 0.0 if t < 1e-12 else 1.0 if t > 1 - 1e-12 else t)
    if loc.node is not None:
        if g.degree(loc.node) != 2:
            return None
        return (loc.node, d)
    return ((loc.edge, loc.t), d)


def newj_matches(gt: GeoGraph, pred: GeoGraph, p: JunctionParams = JunctionParams()) -> tuple[list[JunctionMatch], list[Feature], list[Feature]]:
    """Greedy feature matching by ``alpha * distance + |degree difference|``.

    Returns the accepted matches and the unmatched ground-truth and
    predicted features. Features take part in one match at most; points on
    roads (degree 2 by convention) can absorb any number of features.
    """
    alpha = p.weight
    fg = extract_features(gt, include_endpoints=True)
    fp = extract_features(pred, include_endpoints=True)
    cands = []
    for d, i, j in _close_pairs(fg, fp, p.d_max):
        a, b = fg[i], fp[j]
        cands.append((alpha * d + abs(a.degree - b.degree), (0, a.node), (0, b.node), a, b, "feature"))
    for a in fg:
        hit = _edge_point(pred, a.position, p.d_max)
        if hit is not None:
            ref, d = hit
            cands.append((alpha * d + abs(a.degree - 2), (0, a.node), (1, ref), a, ref, "pred_edge"))
    for b in fp:
        hit = _edge_point(gt, b.position, p.d_max)
        if hit is not None:
            ref, d = hit
            cands.append((alpha * d + abs(2 - b.degree), (1, ref), (0, b.node), ref, b, "gt_edge"))
    cands.sort(key=lambda c: (c[0], _key(c[1]), _key(c[2])))

    used_g: set[int] = set()
    used_p: set[int] = set()
    matches: list[JunctionMatch] = []
    for cost, _, _, a, b, kind in cands:
        if isinstance(a, Feature) and a.node in used_g:
            continue
        if isinstance(b, Feature) and b.node in used_p:
            continue
        if isinstance(a, Feature):
            used_g.add(a.node)
        if isinstance(b, Feature):
            used_p.add(b.node)
        matches.append(JunctionMatch(
            a.node if isinstance(a, Feature) else a,
            b.node if isinstance(b, Feature) else b,
            cost,
            kind,
            a.degree if isinstance(a, Feature) else 2,
            b.degree if isinstance(b, Feature) else 2,
        ))
    unmatched_g = [f for f in fg if f.node not in used_g]
    unmatched_p = [f for f in fp if f.node not in used_p]
    return matches, unmatched_g, unmatched_p


def _key(k):
    # feature keys (0, node) sort before road-point keys (1, ref)
    kind, ref = k
    if kind == 0:
        return (0, ref, 0, 0.0)
    if isinstance(ref, int):
        return (1, ref, 0, 0.0)
    (u, v), t = ref
    return (1, u, v, t)


def road_point_counts(matches: list[JunctionMatch]) -> dict:
    """How often features were matched to points on roads rather than to features.

    ``max_per_road`` is the largest number of features absorbed by a single
    road (edge or degree-2 node) of either graph.
    """
    per_road: dict = {}
    n = 0
    for m in matches:
        if m.kind == "feature":
            continue
        n += 1
        ref = m.pred if m.kind == "pred_edge" else m.gt
        road = ref if isinstance(ref, int) else ref[0]
        key = (m.kind, road)
        per_road[key] = per_road.get(key, 0) + 1
    return {"road_point_matches": n, "max_per_road": max(per_road.values(), default=0)}


def newj(gt: GeoGraph, pred: GeoGraph, p: JunctionParams = JunctionParams()) -> NEWJScore:
    matches, ug, up = newj_matches(gt, pred, p)
    tp = sum(min(m.o_gt, m.o_pred) for m in matches)
    pp = sum(m.o_pred for m in matches) + sum(f.degree for f in up)
    ap = sum(m.o_gt for m in matches) + sum(f.degree for f in ug)
    precision = tp / pp if pp else 0.0
    recall = tp / ap if ap else 0.0
    return NEWJScore(precision, recall, f1_score(precision, recall), tp, pp, ap)
