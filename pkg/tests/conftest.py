import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.spatial import Delaunay, QhullError

from roadmetrics.graph import GeoGraph, edge_key

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def polyline(points, start_id=0):
    """Graph made of one open polyline."""
    nodes = {start_id + i: tuple(map(float, p)) for i, p in enumerate(points)}
    edges = [(start_id + i, start_id + i + 1) for i in range(len(points) - 1)]
    return GeoGraph(nodes, edges)


def union(*graphs):
    nodes, edges = {}, set()
    for g in graphs:
        overlap = set(nodes) & set(g.nodes)
        assert not overlap, "node ids collide"
        nodes.update(g.nodes)
        edges |= g.edges
    return GeoGraph(nodes, edges)


def random_planar(rng, n=20, size=100.0, keep=0.6, integer=False):
    """Random planar graph: a random subset of a Delaunay triangulation."""
    pts = rng.uniform(0, size, size=(n, 2))
    if integer:
        pts = np.round(pts)
        pts = np.unique(pts, axis=0)
    es = set()
    try:
        for s in Delaunay(pts).simplices:
            for i in range(3):
                es.add(edge_key(int(s[i]), int(s[(i + 1) % 3])))
    except QhullError:
        # too few or collinear points: chain them in coordinate order
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        es = {edge_key(int(a), int(b)) for a, b in zip(order, order[1:])}
    es = [e for e in sorted(es) if rng.random() < keep]
    used = {u for e in es for u in e}
    return GeoGraph({i: (float(p[0]), float(p[1])) for i, p in enumerate(pts) if i in used}, es)


def grid_city(nx=4, ny=4, block=100.0, step=None):
    """Axis-aligned street grid; optionally with degree-2 nodes every ``step``."""
    nodes, edges = {}, []
    ids = {}
    for i in range(nx):
        for j in range(ny):
            ids[i, j] = len(nodes)
            nodes[ids[i, j]] = (i * block, j * block)
    for i in range(nx):
        for j in range(ny):
            for di, dj in ((1, 0), (0, 1)):
                if i + di < nx and j + dj < ny:
                    a, b = ids[i, j], ids[i + di, j + dj]
                    if step:
                        k = int(math.ceil(block / step))
                        prev = a
                        (x0, y0), (x1, y1) = nodes[a], nodes[b]
                        for s in range(1, k):
                            n = len(nodes)
                            nodes[n] = (x0 + (x1 - x0) * s / k, y0 + (y1 - y0) * s / k)
                            edges.append((prev, n))
                            prev = n
                        edges.append((prev, b))
                    else:
                        edges.append((a, b))
    return GeoGraph(nodes, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
