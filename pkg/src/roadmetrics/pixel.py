"""Rasterization and the relaxed pixel scores (correctness, completeness, quality)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .graph import GeoGraph


@dataclass(frozen=True)
class Mask:
    """Boolean raster; row 0 is the lowest y, column 0 the lowest x."""

    bits: np.ndarray
    origin: tuple[float, float]
    resolution: float

    def __post_init__(self):
        if self.bits.ndim != 2 or min(self.bits.shape) <= 0:
            raise ValueError("mask must be a non-empty 2-D grid")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


@dataclass(frozen=True)
class CCQScore:
    correctness: float
    completeness: float
    quality: float


def extent_for(*graphs: GeoGraph, margin: float = 0.0) -> tuple[float, float, float, float]:
    """Bounding box covering every non-empty graph, padded by ``margin``."""
    boxes = [g.bbox() for g in graphs if g.nodes]
    if not boxes:
        return (0.0, 0.0, 1.0, 1.0)
    b = np.array(boxes)
    return (
        float(b[:, 0].min() - margin),
        float(b[:, 1].min() - margin),
        float(b[:, 2].max() + margin),
        float(b[:, 3].max() + margin),
    )


def rasterize(g: GeoGraph, resolution: float, extent: tuple[float, float, float, float]) -> Mask:
    """Burn edges into a mask covering ``extent`` = (xmin, ymin, xmax, ymax).

    A pixel is set when its center lies within half a pixel of a segment.
    The pixels containing points sampled every quarter pixel along each
    segment are also set, which keeps strokes 8-connected.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    xmin, ymin, xmax, ymax = extent
    for n, (x, y) in g.nodes.items():
        if not (xmin <= x <= xmax and ymin <= y <= ymax):
            raise ValueError(f"node {n} at ({x}, {y}) lies outside the raster extent")
    w = max(1, int(math.floor((xmax - xmin) / resolution)) + 1)
    h = max(1, int(math.floor((ymax - ymin) / resolution)) + 1)
    bits = np.zeros((h, w), dtype=bool)
    for u, v in g.sorted_edges:
        (x0, y0), (x1, y1) = g.nodes[u], g.nodes[v]
        # pixel-space coordinates, pixel (r, c) has its center at (c, r)
        ax, ay = (x0 - xmin) / resolution - 0.5, (y0 - ymin) / resolution - 0.5
        bx, by = (x1 - xmin) / resolution - 0.5, (y1 - ymin) / resolution - 0.5
        c0, c1 = max(0, int(math.floor(min(ax, bx)))), min(w - 1, int(math.ceil(max(ax, bx))))
        r0, r1 = max(0, int(math.floor(min(ay, by)))), min(h - 1, int(math.ceil(max(ay, by))))
        cc, rr = np.meshgrid(np.arange(c0, c1 + 1), np.arange(r0, r1 + 1))
        dx, dy = bx - ax, by - ay
        t = np.clip(((cc - ax) * dx + (rr - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0)
        d = np.hypot(cc - (ax + t * dx), rr - (ay + t * dy))
        hit = d <= 0.5 + 1e-9
        bits[rr[hit], cc[hit]] = True

        n = max(2, int(math.ceil(math.hypot(dx, dy) * 4)) + 1)
        s = np.linspace(0.0, 1.0, n)
        cols = np.clip(np.floor(ax + 0.5 + s * dx).astype(int), 0, w - 1)
        rows = np.clip(np.floor(ay + 0.5 + s * dy).astype(int), 0, h - 1)
        bits[rows, cols] = True
    return Mask(bits, (xmin, ymin), float(resolution))


def ccq(gt: Mask, pred: Mask, slack: int = 5) -> CCQScore:
    """Relaxed precision (correctness), recall (completeness) and quality.

    Pixels count as matched when the other mask has a pixel within
    Chebyshev distance ``slack``. Quality combines the two relaxed rates as
    ``1 / (1/corr + 1/comp - 1)``, which reduces to IoU at zero slack.
    """
    if gt.bits.shape != pred.bits.shape or gt.resolution != pred.resolution:
        raise ValueError("masks must share shape and resolution")
    if slack < 0:
        raise ValueError("slack must be non-negative")
    g, p = gt.bits, pred.bits
    if slack:
        size = 2 * slack + 1
        g_near = ndimage.maximum_filter(g, size=size, mode="constant", cval=False)
        p_near = ndimage.maximum_filter(p, size=size, mode="constant", cval=False)
    else:
        g_near, p_near = g, p
    n_pred, n_gt = int(p.sum()), int(g.sum())
    tp_pred = int(np.count_nonzero(p & g_near))
    tp_gt = int(np.count_nonzero(g & p_near))
    corr = tp_pred / n_pred if n_pred else 0.0
    comp = tp_gt / n_gt if n_gt else 0.0
    if corr > 0 and comp > 0:
        qual = corr * comp / (corr + comp - corr * comp)
    else:
        qual = 0.0
    return CCQScore(corr, comp, qual)


def ccq_graphs(gt: GeoGraph, pred: GeoGraph, resolution: float = 1.0, slack: int = 5) -> CCQScore:
    extent = extent_for(gt, pred, margin=(slack + 2) * resolution)
    return ccq(rasterize(gt, resolution, extent), rasterize(pred, resolution, extent), slack)


def write_png(mask: Mask, path) -> None:
    """Write a 1-bit PNG with the top row at the highest y."""
    Image.fromarray(mask.bits[::-1].copy()).convert("1").save(path)
