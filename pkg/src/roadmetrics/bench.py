"""Benchmark presets: severity grids per error kind and a mixed-error ensemble."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .perturb import COUNT_KINDS, PerturbationSpec, make_pair
from .report import PerturbParams, Settings, cell_seed, graph_info, score_pair
from .synth import synthetic_city

# Severity grids for the synthetic cities. Overconnections must bridge the
# gaps between districts (the only places where two points are close by air
# but far by road), and removal disks must swallow a whole district so the
# remaining ground truth never touches what was removed.
GRIDS = {
    "interruptions": (0, 5, 10, 15, 20),
    "overconnections": (0, 1, 2, 3, 4),
    "node_noise": (0, 5, 10, 15, 20),
    "doubled_pred": (0, 5, 10, 15, 20),
    "doubled_gt": (0, 5, 10, 15, 20),
    "far_false_positives": (0, 0.15, 0.3, 0.45, 0.6),
}
PERTURB = PerturbParams(r_max=1000.0, disk_radius=640.0)


def benchmark_settings(seed: int = 0, base: Settings | None = None) -> Settings:
    base = base or Settings()
    s = Settings.from_dict({**base.as_dict(), "perturb": {}}, seed=seed)
    return replace(s, perturb=PERTURB)


def mixed_pair(g, seed: int, pp: PerturbParams = PERTURB, p_active: float = 0.5) -> tuple[dict, object, object]:
    """Corrupt ``g`` with several error kinds at once, like a real extraction would.

    Each kind is switched on with probability ``p_active`` and gets a
    severity drawn uniformly from its grid range. Ground-truth kinds alter
    the ground-truth copy, the rest alter the prediction; noise goes last
    so it also shakes injected roads.
    """
    rng = np.random.default_rng(seed)
    order = ("interruptions", "overconnections", "doubled_pred", "node_noise", "doubled_gt", "far_false_positives")
    severities = {}
    for kind in order:
        active = rng.random() < p_active
        sev = float(rng.uniform(0, GRIDS[kind][-1]))
        if kind in COUNT_KINDS:
            sev = float(round(sev))
        severities[kind] = sev if active else 0.0
    gt = pred = g
    for i, kind in enumerate(order):
        spec = PerturbationSpec(kind, severities[kind], seed * 16 + i, pp.gap, pp.r_min, pp.r_max, pp.offset, pp.disk_radius)
        if kind in ("doubled_gt", "far_false_positives"):
            gt = make_pair(gt, spec).gt
        else:
            pred = make_pair(pred, spec).pred
    return severities, gt, pred


def ensemble(n: int = 50, seed: int = 0, settings: Settings | None = None):
    """``n`` scored mixed-error pairs, each built on its own synthetic city.

    Yields ``(severities, report)``.
    """
    settings = settings or benchmark_settings(seed)
    for i in range(n):
        g = synthetic_city(cell_seed(seed, i, 0) % 2**32)
        sev, gt, pred = mixed_pair(g, cell_seed(seed, i, 1), settings.perturb)
        report, _ = score_pair(gt, pred, settings=settings,
                               inputs={"gt": graph_info(gt), "pred": graph_info(pred)})
        yield sev, report
