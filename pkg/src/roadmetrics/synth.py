"""Synthetic road networks used as benchmark seeds."""

from __future__ import annotations

import math

import numpy as np

from .graph import GeoGraph


def synthetic_city(
    seed: int,
    districts: tuple[int, int] = (3, 2),
    grid: tuple[int, int] = (3, 3),
    block: float = 150.0,
    gap: float = 900.0,
    drop: float = 0.15,
    spurs: int = 3,
    spur_length: tuple[float, float] = (0.3, 0.6),
    bend: float = 6.0,
    step: float = 25.0,
) -> GeoGraph:
    """Jittered street grids ("districts") laid out side by side.

    The grids of neighbouring districts are ``gap`` meters apart and are not
    connected to one another, so whole districts can vanish from one copy
    without touching the roads of another. Streets are polylines with a node every
    ``step`` meters and a gentle lateral bend of up to ``bend`` meters;
    ``spurs`` dead-end roads, ``spur_length`` blocks long, leave each
    district boundary.
    """
    rng = np.random.default_rng(seed)
    nodes: dict[int, tuple[float, float]] = {}
    edges: list[tuple[int, int]] = []
    nx, ny = grid
    width = (nx - 1) * block
    height = (ny - 1) * block

    def add(x: float, y: float) -> int:
        nid = len(nodes)
        nodes[nid] = (float(x), float(y))
        return nid

    def road(a: int, b: int) -> None:
        (x0, y0), (x1, y1) = nodes[a], nodes[b]
        L = math.hypot(x1 - x0, y1 - y0)
        k = max(1, round(L / step))
        amp = rng.uniform(-bend, bend)
        nxv, nyv = -(y1 - y0) / L, (x1 - x0) / L
        prev = a
        for i in range(1, k):
            f = i / k
            off = amp * math.sin(math.pi * f)
            cur = add(x0 + f * (x1 - x0) + off * nxv, y0 + f * (y1 - y0) + off * nyv)
            edges.append((prev, cur))
            prev = cur
        edges.append((prev, b))

    for di in range(districts[0]):
        for dj in range(districts[1]):
            ox = di * (width + gap)
            oy = dj * (height + gap)
            ids = {}
            for i in range(nx):
                for j in range(ny):
                    jit = rng.uniform(-0.12, 0.12, size=2) * block
                    ids[i, j] = add(ox + i * block + jit[0], oy + j * block + jit[1])
            links = []
            for i in range(nx):
                for j in range(ny):
                    if i + 1 < nx:
                        links.append((ids[i, j], ids[i + 1, j]))
                    if j + 1 < ny:
                        links.append((ids[i, j], ids[i, j + 1]))
            keep = rng.random(len(links)) >= drop
            for (a, b), k in zip(links, keep):
                if k:
                    road(a, b)
            border = [(i, j) for i in range(nx) for j in range(ny) if i in (0, nx - 1) or j in (0, ny - 1)]
            for s in rng.choice(len(border), size=min(spurs, len(border)), replace=False):
                i, j = border[int(s)]
                dx = -1 if i == 0 else 1 if i == nx - 1 else 0
                dy = -1 if j == 0 else 1 if j == ny - 1 else 0
                if dx and dy and rng.random() < 0.5:
                    dx = 0
                elif dx and dy:
                    dy = 0
                length = rng.uniform(*spur_length) * block
                x, y = nodes[ids[i, j]]
                end = add(x + dx * length, y + dy * length)
                road(ids[i, j], end)

    used = {n for e in edges for n in e}
    return GeoGraph({n: p for n, p in nodes.items() if n in used}, edges)
