"""Scoring a graph pair with any subset of metrics, plus sweeps and correlations over many pairs."""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import time
from importlib import resources
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path as FsPath

import numpy as np

from .graph import GeoGraph, save_graph
from .junction import JunctionParams, junct_legacy, newj, newj_matches, road_point_counts
from .path import PathParams, apls, newp, tlts
from .perturb import KINDS, PerturbationSpec, make_pair
from .pixel import ccq, extent_for, rasterize, write_png
from .subgraph import SubgraphParams, graph_legacy, newg

METRICS = ("ccq", "tlts", "apls", "junct", "graph", "newp", "newj", "newg")
LEGACY = ("ccq", "tlts", "apls", "junct", "graph")
NEW = ("newp", "newj", "newg")

# the one number per metric used for correlations
SUMMARY = {
    "ccq": "quality",
    "tlts": "correct",
    "apls": "score",
    "junct": "f1",
    "graph": "f1",
    "newp": "f1",
    "newj": "f1",
    "newg": "f1",
}

REPORT_FORMAT = "roadmetrics.score/1"
SWEEP_FORMAT = "roadmetrics.sweep/1"
CORRELATION_FORMAT = "roadmetrics.correlation/1"


class MetricError(RuntimeError):
    pass


@dataclass(frozen=True)
class CCQParams:
    resolution: float = 1.0
    slack: int = 5

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.slack < 0 or int(self.slack) != self.slack:
            raise ValueError("slack must be a non-negative integer")


@dataclass(frozen=True)
class PerturbParams:
    gap: float = 20.0
    r_min: float = 50.0
    r_max: float = 300.0
    offset: float = 15.0
    disk_radius: float = 200.0


@dataclass(frozen=True)
class Settings:
    """Every knob that influences a score. Serialised verbatim into reports."""

    seed: int = 0
    ccq: CCQParams = field(default_factory=CCQParams)
    path: PathParams = field(default_factory=PathParams)
    junction: JunctionParams = field(default_factory=JunctionParams)
    subgraph: SubgraphParams = field(default_factory=SubgraphParams)
    newg_first: str = "gt"
    perturb: PerturbParams = field(default_factory=PerturbParams)

    def __post_init__(self):
        if self.newg_first not in ("gt", "pred"):
            raise ValueError("newg_first must be 'gt' or 'pred'")

    @classmethod
    def from_dict(cls, doc: dict | None = None, seed: int | None = None) -> "Settings":
        """Build settings from a nested dict; ``seed`` overrides the top-level seed.

        The top-level seed is copied into the path and subgraph sections
        unless those sections set their own.
        """
        doc = dict(doc or {})
        sections = {"ccq": CCQParams, "path": PathParams, "junction": JunctionParams,
                    "subgraph": SubgraphParams, "perturb": PerturbParams}
        unknown = set(doc) - set(sections) - {"seed", "newg_first"}
        if unknown:
            raise ValueError(f"unknown settings: {', '.join(sorted(unknown))}")
        top_seed = int(seed if seed is not None else doc.get("seed", 0))
        kw: dict = {"seed": top_seed}
        if "newg_first" in doc:
            kw["newg_first"] = doc["newg_first"]
        for name, typ in sections.items():
            sec = dict(doc.get(name) or {})
            allowed = {f.name for f in fields(typ)}
            bad = set(sec) - allowed
            if bad:
                raise ValueError(f"unknown {name} settings: {', '.join(sorted(bad))}")
            if "seed" in allowed and (seed is not None or "seed" not in sec):
                sec["seed"] = top_seed
            kw[name] = typ(**sec)
        return cls(**kw)

    def as_dict(self) -> dict:
        return asdict(self)


def load_schema(name: str) -> dict:
    """Published JSON schema: ``report``, ``sweep``, ``correlation`` or ``manifest``."""
    text = resources.files("roadmetrics").joinpath("schemas", f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def graph_info(g: GeoGraph, raw: bytes | None = None) -> dict:
    return {
        "sha256": digest(raw if raw is not None else save_graph(g)),
        "nodes": len(g.nodes),
        "edges": len(g.edges),
        "length": g.total_length,
    }


def _as_values(obj) -> dict:
    out = {}
    for k, v in asdict(obj).items():
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            out[k] = v
    return out


def score_metric(name: str, gt: GeoGraph, pred: GeoGraph, s: Settings, dumps: dict | None = None) -> tuple[dict, dict]:
    """Scores and diagnostics of one metric."""
    diag: dict = {}
    if name == "ccq":
        c = s.ccq
        extent = extent_for(gt, pred, margin=(c.slack + 2) * c.resolution)
        mg, mp = rasterize(gt, c.resolution, extent), rasterize(pred, c.resolution, extent)
        if dumps is not None:
            dumps["ccq_masks"] = (mg, mp)
        return _as_values(ccq(mg, mp, c.slack)), diag
    if name == "tlts":
        return _as_values(tlts(gt, pred, s.path)), diag
    if name == "apls":
        return {"score": apls(gt, pred, s.path)}, diag
    if name == "junct":
        return _as_values(junct_legacy(gt, pred, s.junction)), diag
    if name == "graph":
        if not gt.edges:
            raise MetricError("ground truth has no edges")
        log = [] if dumps is not None else None
        r = graph_legacy(gt, pred, s.subgraph, dump=log)
        if log is not None:
            dumps["graph_iterations"] = log
        return _as_values(r), diag
    if name == "newp":
        r = newp(gt, pred, s.path)
        return _as_values(r), r.diagnostics
    if name == "newj":
        matches, _, _ = newj_matches(gt, pred, s.junction)
        if dumps is not None:
            dumps["newj_matches"] = [m.as_dict() for m in matches]
        return _as_values(newj(gt, pred, s.junction)), road_point_counts(matches)
    if name == "newg":
        if not gt.edges and not pred.edges:
            raise MetricError("both graphs are empty")
        log = [] if dumps is not None else None
        r = newg(gt, pred, s.subgraph, first=s.newg_first, dump=log)
        if log is not None:
            dumps["newg_iterations"] = log
        values = _as_values(r)
        values.pop("tp_pred")
        return values, diag
    raise ValueError(f"unknown metric {name!r}")


def score_pair(
    gt: GeoGraph,
    pred: GeoGraph,
    metrics=METRICS,
    settings: Settings = Settings(),
    inputs: dict | None = None,
    dumps: dict | None = None,
) -> tuple[dict, dict]:
    """Score one pair. Returns ``(report, wall_times)``.

    The report holds only values that are a pure function of the inputs
    and settings, so equal inputs produce byte-identical serialisations.
    A metric that raises is recorded under ``errors`` and the rest still run.
    """
    bad = [m for m in metrics if m not in METRICS]
    if bad:
        raise ValueError(f"unknown metrics: {', '.join(bad)}")
    report: dict = {
        "format": REPORT_FORMAT,
        "inputs": inputs or {"gt": graph_info(gt), "pred": graph_info(pred)},
        "settings": settings.as_dict(),
        "metrics": {},
        "summary": {},
        "diagnostics": {},
        "errors": {},
    }
    times: dict[str, float] = {}
    for name in METRICS:
        if name not in metrics:
            continue
        t0 = time.perf_counter()
        try:
            values, diag = score_metric(name, gt, pred, settings, dumps)
        except (MetricError, ValueError, ArithmeticError) as exc:
            report["errors"][name] = f"{type(exc).__name__}: {exc}"
        else:
            report["metrics"][name] = values
            report["summary"][name] = values[SUMMARY[name]]
            if diag:
                report["diagnostics"][name] = diag
        times[name] = time.perf_counter() - t0
    return report, times


def dumps_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(report: dict, path, times: dict | None = None) -> None:
    """Write the report; wall-times go to a ``.timing.json`` file beside it."""
    path = FsPath(path)
    path.write_text(dumps_json(report), encoding="utf-8")
    if times is not None:
        timing_path(path).write_text(dumps_json({"wall_seconds": times}), encoding="utf-8")


def timing_path(path) -> FsPath:
    path = FsPath(path)
    return path.with_name(path.stem + ".timing.json")


def write_dumps(dumps: dict, directory) -> list[FsPath]:
    directory = FsPath(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if "ccq_masks" in dumps:
        for tag, mask in zip(("gt", "pred"), dumps["ccq_masks"]):
            p = directory / f"ccq_{tag}.png"
            write_png(mask, p)
            written.append(p)
    if "newj_matches" in dumps:
        p = directory / "newj_matches.json"
        p.write_text(dumps_json(dumps["newj_matches"]), encoding="utf-8")
        written.append(p)
    for key in ("graph_iterations", "newg_iterations"):
        if key in dumps:
            p = directory / f"{key}.jsonl"
            with p.open("w", encoding="utf-8") as fh:
                for row in dumps[key]:
                    fh.write(json.dumps(row, sort_keys=True) + "\n")
            written.append(p)
    return written


def csv_row(report: dict) -> tuple[list[str], list]:
    """Flat header and values: one column per metric component."""
    header, values = [], []
    for name in METRICS:
        for comp, v in sorted(report["metrics"].get(name, {}).items()):
            header.append(f"{name}.{comp}")
            values.append(v)
    return header, values


# --------------------------------------------------------------------------
# Sweeps
# --------------------------------------------------------------------------

def cell_seed(seed: int, input_index: int, seed_index: int) -> int:
    """Perturbation seed of a sweep cell.

    It does not depend on severity, so all severities of one seed share
    their random draws and damage grows incrementally.
    """
    return int(np.random.SeedSequence([seed, input_index, seed_index]).generate_state(2, np.uint64)[0] >> np.uint64(1))


def _run_cell(job) -> dict:
    graph, kind, severity, perturb_seed, metrics, settings, meta = job
    pp = settings.perturb
    spec = PerturbationSpec(kind, severity, perturb_seed, pp.gap, pp.r_min, pp.r_max, pp.offset, pp.disk_radius)
    out = dict(meta)
    try:
        pair = make_pair(graph, spec)
    except ValueError as exc:
        out.update(achieved=None, metrics={}, error=f"perturb: {exc}")
        return out
    report, _ = score_pair(pair.gt, pair.pred, metrics, settings)
    out["achieved"] = pair.achieved
    out["metrics"] = report["metrics"]
    out["error"] = "; ".join(f"{k}: {v}" for k, v in sorted(report["errors"].items())) or None
    return out


def _pool_map(fn, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs, chunksize=1))


def sweep(
    graphs: list[GeoGraph],
    kind: str,
    grid,
    n_seeds: int,
    settings: Settings = Settings(),
    metrics=METRICS,
    threads: int = 1,
) -> dict:
    """Perturb every input at every severity with ``n_seeds`` seeds and score each pair."""
    grid = [float(x) for x in grid]
    if not grid:
        raise ValueError("severity grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("severity grid must be strictly increasing")
    if kind not in KINDS:
        raise ValueError(f"unknown perturbation kind {kind!r}")
    if n_seeds < 1:
        raise ValueError("need at least one seed")
    jobs = []
    for i, g in enumerate(graphs):
        for k in range(n_seeds):
            ps = cell_seed(settings.seed, i, k)
            for s in grid:
                meta = {"input": i, "severity": s, "seed_index": k, "seed": ps}
                jobs.append((g, kind, s, ps, tuple(metrics), settings, meta))
    cells = _pool_map(_run_cell, jobs, threads)
    cells.sort(key=lambda c: (c["severity"], c["input"], c["seed_index"]))
    return {
        "format": SWEEP_FORMAT,
        "kind": kind,
        "grid": grid,
        "n_seeds": n_seeds,
        "inputs": [graph_info(g) for g in graphs],
        "settings": settings.as_dict(),
        "cells": cells,
        "curves": curves(cells, grid),
    }


def curves(cells: list[dict], grid) -> dict:
    """metric -> component -> list of per-severity means (``None`` if no cell succeeded)."""
    acc: dict = {}
    for c in cells:
        for m, comps in c["metrics"].items():
            for comp, v in comps.items():
                acc.setdefault(m, {}).setdefault(comp, {}).setdefault(c["severity"], []).append(v)
    out: dict = {}
    for m in sorted(acc):
        out[m] = {}
        for comp in sorted(acc[m]):
            by_sev = acc[m][comp]
            out[m][comp] = [math.fsum(by_sev[s]) / len(by_sev[s]) if s in by_sev else None for s in grid]
    return out


def sweep_csv(result: dict, metric: str) -> str:
    lines = ["severity,seed,metric,component,value"]
    for c in result["cells"]:
        for comp, v in sorted(c["metrics"].get(metric, {}).items()):
            lines.append(f"{c['severity']!r},{c['seed']},{metric},{comp},{v!r}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Correlation
# --------------------------------------------------------------------------

def pearson(x, y) -> float | None:
    """Pearson's r, or ``None`` when either input has zero variance."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("need two equally long samples of size >= 2")
    mx, my = math.fsum(x) / len(x), math.fsum(y) / len(y)
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    sxx = math.fsum(a * a for a in dx)
    syy = math.fsum(b * b for b in dy)
    if sxx == 0 or syy == 0:
        return None
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    return max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))


def summaries(doc: dict) -> list[dict]:
    """Per-pair metric summaries found in a score report or a sweep result."""
    if doc.get("format") == REPORT_FORMAT:
        return [dict(doc["summary"])]
    if doc.get("format") == SWEEP_FORMAT:
        rows = []
        for c in doc["cells"]:
            rows.append({m: v[SUMMARY[m]] for m, v in c["metrics"].items()})
        return rows
    raise ValueError("not a score report or sweep result")


def correlation_matrix(rows: list[dict], metrics) -> dict:
    metrics = list(metrics)
    usable = [r for r in rows if all(m in r for m in metrics)]
    if len(usable) < 3:
        raise ValueError(f"need at least 3 reports with all of {metrics}, found {len(usable)}")
    cols = {m: [r[m] for r in usable] for m in metrics}
    matrix = [[pearson(cols[a], cols[b]) for b in metrics] for a in metrics]
    return {
        "format": CORRELATION_FORMAT,
        "metrics": metrics,
        "n": len(usable),
        "matrix": matrix,
        "triplets": triplet_means(metrics, matrix),
    }


def triplet_means(metrics, matrix) -> list[dict]:
    """Mean pairwise correlation of every metric triplet, best first; undefined ones last."""
    idx = {m: i for i, m in enumerate(metrics)}
    out = []
    for tri in itertools.combinations(metrics, 3):
        rs = [matrix[idx[a]][idx[b]] for a, b in itertools.combinations(tri, 2)]
        mean = None if any(r is None for r in rs) else math.fsum(rs) / 3
        out.append({"metrics": list(tri), "mean": mean})
    out.sort(key=lambda t: (t["mean"] is None, -(t["mean"] or 0.0), t["metrics"]))
    return out

