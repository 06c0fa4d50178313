import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import grid_city, polyline, random_planar, union
from roadmetrics.graph import GeoGraph, densify, remove_edges
from roadmetrics.junction import (
    JunctionParams,
    extract_features,
    junct_legacy,
    newj,
    newj_matches,
    road_point_counts,
)
from roadmetrics.perturb import inject_interruptions


def plus(arm=100.0):
    return GeoGraph({0: (0, 0), 1: (arm, 0), 2: (0, arm), 3: (-arm, 0), 4: (0, -arm)},
                    [(0, 1), (0, 2), (0, 3), (0, 4)])


def tee(arms=3, arm=100.0):
    """Junction at the origin with arms east, west and (if arms == 3) north."""
    nodes = {0: (0, 0), 1: (arm, 0), 2: (-arm, 0), 3: (0, arm)}
    edges = [(0, 1), (0, 2)] + ([(0, 3)] if arms == 3 else [])
    if arms == 2:
        del nodes[3]
    return GeoGraph(nodes, edges)


def test_plus_features():
    assert len(extract_features(plus(), False)) == 1
    feats = extract_features(plus(), True)
    assert len(feats) == 5
    assert sorted(f.kind for f in feats) == ["endpoint"] * 4 + ["junction"]


def test_polyline_features():
    g = densify(polyline([(0, 0), (50, 10), (90, 0)]), 5)
    assert extract_features(g, False) == []
    assert [f.degree for f in extract_features(g, True)] == [1, 1]


def test_ring_has_no_features():
    g = GeoGraph({0: (0, 0), 1: (10, 0), 2: (10, 10), 3: (0, 10)}, [(0, 1), (1, 2), (2, 3), (0, 3)])
    assert extract_features(g, False) == extract_features(g, True) == []


def test_params_validation():
    with pytest.raises(ValueError):
        JunctionParams(d_max=0)
    with pytest.raises(ValueError):
        JunctionParams(alpha=-1)
    assert JunctionParams(d_max=20).weight == 0.1
    assert JunctionParams(alpha=0.3).weight == 0.3


# --------------------------------------------------------------------------
# Legacy score
# --------------------------------------------------------------------------

def test_legacy_identity():
    g = grid_city(4, 4, step=20)
    s = junct_legacy(g, g)
    assert (s.f_correct, s.f_error, s.f1) == (1.0, 0.0, 1.0)


def test_legacy_missing_arm_scores_nothing():
    # the pred node keeps two of three edges, so it is no junction at all
    s = junct_legacy(tee(3), tee(2))
    assert s.f_correct == 0.0


def test_legacy_partial_arms():
    # pred keeps a junction of degree 3 but one arm points the wrong way
    gt = plus()
    pred = GeoGraph({0: (0, 0), 1: (100, 0), 2: (0, 100), 3: (-100, 0)}, [(0, 1), (0, 2), (0, 3)])
    s = junct_legacy(gt, pred)
    assert math.isclose(s.f_correct, 3 / 4) and s.f_error == 0.0


def test_legacy_blind_to_breaks_between_junctions():
    g = grid_city(4, 4, block=150, step=10)
    # cut one edge in the middle of every block, far from any junction
    mids = []
    for u, v in g.sorted_edges:
        (x0, y0), (x1, y1) = g.nodes[u], g.nodes[v]
        cx, cy = (x0 + x1) / 2 % 150, (y0 + y1) / 2 % 150
        if min(abs(cx - 75), abs(cy - 75)) < 5 and g.degree(u) == g.degree(v) == 2:
            mids.append((u, v))
    broken = remove_edges(g, mids)
    assert len(mids) == 24
    assert junct_legacy(g, broken) == junct_legacy(g, g)
    assert newj(g, broken).recall < 1.0


# --------------------------------------------------------------------------
# NEWJ
# --------------------------------------------------------------------------

def test_newj_identity():
    g = grid_city(4, 4, step=20)
    s = newj(g, g)
    assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)


def test_newj_missing_arm_keeps_two_thirds():
    s = newj(tee(3), tee(2))
    # junction (o=3) on a road point (o=2): TP 2, AP 3; the two shared endpoints: TP 1 each
    # the lost arm's endpoint is unmatched: AP 1
    assert (s.tp, s.pp, s.ap) == (4, 4, 6)
    assert math.isclose(s.recall, 2 / 3) and s.precision == 1.0
    matches, _, _ = newj_matches(tee(3), tee(2))
    junction = [m for m in matches if m.gt == 0]
    assert len(junction) == 1 and junction[0].kind == "pred_edge"
    assert (junction[0].o_gt, junction[0].o_pred) == (3, 2)


def test_newj_single_break():
    gt = polyline([(0, 0), (200, 0)])
    pred = union(polyline([(0, 0), (90, 0)]), polyline([(110, 0), (200, 0)], start_id=2))
    base = newj(gt, gt)
    s = newj(gt, pred)
    assert s.tp - base.tp == 2 and s.pp - base.pp == 2 and s.ap - base.ap == 4
    assert s.recall < 1.0 and s.precision == 1.0
    matches, _, _ = newj_matches(gt, pred)
    assert road_point_counts(matches) == {"road_point_matches": 2, "max_per_road": 2}


def test_newj_interruptions_monotone():
    g = grid_city(5, 5, block=150)
    recalls = [newj(g, inject_interruptions(g, n, gap=20, seed=1)).recall for n in (0, 4, 8, 12, 16)]
    assert all(a > b for a, b in zip(recalls, recalls[1:]))


def test_greedy_prefers_cheaper_match():
    # a gt junction with a pred junction 10 m away (o equal) and a pred road through it
    gt = plus()
    pred = union(
        GeoGraph({10: (10, 0), 11: (110, 0), 12: (10, 100), 13: (-90, 0), 14: (10, -100)},
                 [(10, 11), (10, 12), (10, 13), (10, 14)]),
    )
    matches, _, _ = newj_matches(gt, pred)
    m = next(m for m in matches if m.gt == 0)
    # 0.08 * 10 < |4 - 2|
    assert m.pred == 10 and m.kind == "feature" and math.isclose(m.cost, 0.8)


def test_far_features_unmatched():
    gt = polyline([(0, 0), (100, 0)])
    pred = polyline([(0, 500), (100, 500)])
    s = newj(gt, pred)
    assert (s.tp, s.pp, s.ap, s.precision, s.recall, s.f1) == (0, 2, 2, 0.0, 0.0, 0.0)


def test_empty_graphs():
    e = GeoGraph({}, [])
    s = newj(e, e)
    assert (s.precision, s.recall) == (0.0, 0.0)
    assert junct_legacy(e, e).f1 == 0.0


@given(st.integers(0, 10_000))
def test_role_exchange(seed):
    rng = np.random.default_rng(seed)
    a, b = random_planar(rng, n=25, size=200), random_planar(rng, n=25, size=200)
    x, y = newj(a, b), newj(b, a)
    assert x.precision == y.recall and x.recall == y.precision
    assert x.tp <= min(x.pp, x.ap)


@given(st.integers(0, 10_000))
def test_deterministic(seed):
    rng = np.random.default_rng(seed)
    a, b = random_planar(rng, n=25, size=200), random_planar(rng, n=25, size=200)
    assert newj_matches(a, b) == newj_matches(a, b)
    assert junct_legacy(a, b) == junct_legacy(a, b)
