"""Command line front end: ``score``, ``perturb``, ``sweep`` and ``correlate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import report as rep
from .graph import GraphFormatError, GraphValidationError, read_graph, write_graph
from .perturb import KINDS, PerturbationSpec, make_pair
from .synth import synthetic_city

log = logging.getLogger("roadmetrics")

EXIT_OK, EXIT_INPUT, EXIT_METRIC = 0, 2, 3


class InputError(Exception):
    pass


def load_config(path) -> dict:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix == ".toml":
            return tomllib.loads(raw.decode("utf-8"))
        return json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise InputError(f"bad config {path}: {exc}") from exc


def _parse_value(text: str):
    try:
        return json.loads(text)
    except ValueError:
        return text


def _apply_overrides(doc: dict, pairs) -> dict:
    """Apply ``section.key=value`` overrides to a nested config dict."""
    doc = json.loads(json.dumps(doc))
    for item in pairs or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"--set expects section.key=value, got {item!r}")
        *parents, leaf = key.split(".")
        node = doc
        for p in parents:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise InputError(f"--set {key}: {p} is not a section")
        node[leaf] = _parse_value(value)
    return doc


def _settings(args, config: dict) -> rep.Settings:
    doc = {k: v for k, v in config.items() if k in ("seed", "newg_first", "ccq", "path", "junction", "subgraph", "perturb")}
    doc = _apply_overrides(doc, getattr(args, "set", None))
    for flag, key in (("gap", "gap"), ("r_min", "r_min"), ("r_max", "r_max"), ("offset", "offset"), ("disk_radius", "disk_radius")):
        v = getattr(args, flag, None)
        if v is not None:
            doc.setdefault("perturb", {})[key] = v
    try:
        return rep.Settings.from_dict(doc, seed=args.seed)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid settings: {exc}") from exc


def _metrics(text: str | None, config: dict) -> tuple[str, ...]:
    if text is None:
        value = config.get("metrics", "all")
        text = value if isinstance(value, str) else ",".join(value)
    if text == "all":
        return rep.METRICS
    names = tuple(m.strip().lower() for m in text.split(",") if m.strip())
    bad = [m for m in names if m not in rep.METRICS]
    if bad or not names:
        raise InputError(f"unknown metrics {bad}; choose from {', '.join(rep.METRICS)} or 'all'")
    return names


def _read(path):
    try:
        raw = Path(path).read_bytes()
        return read_graph(path), raw
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except (GraphFormatError, GraphValidationError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _grid(text: str) -> list[float]:
    try:
        grid = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"bad severity grid {text!r}") from exc
    if not grid:
        raise InputError("severity grid is empty")
    return grid


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_score(args, config) -> int:
    settings = _settings(args, config)
    metrics = _metrics(args.metrics, config)
    gt, gt_raw = _read(args.gt)
    pred, pred_raw = _read(args.pred)
    inputs = {"gt": rep.graph_info(gt, gt_raw), "pred": rep.graph_info(pred, pred_raw)}
    dumps = {} if args.dump_dir else None
    report, times = rep.score_pair(gt, pred, metrics, settings, inputs, dumps)
    rep.write_report(report, args.out, times)
    if args.csv:
        header, values = rep.csv_row(report)
        csv_path = Path(args.csv)
        new = not csv_path.exists() or csv_path.stat().st_size == 0
        with csv_path.open("a", encoding="utf-8") as fh:
            if new:
                fh.write(",".join(header) + "\n")
            fh.write(",".join(repr(v) for v in values) + "\n")
    if dumps is not None:
        rep.write_dumps(dumps, args.dump_dir)
    for name, value in report["summary"].items():
        log.info("%s %s = %.4f", name, rep.SUMMARY[name], value)
    if report["errors"]:
        for name, msg in report["errors"].items():
            print(f"error: {name}: {msg}", file=sys.stderr)
        return EXIT_METRIC
    return EXIT_OK


def cmd_perturb(args, config) -> int:
    settings = _settings(args, config)
    g, raw = _read(args.input)
    pp = settings.perturb
    try:
        spec = PerturbationSpec(args.kind, args.severity, settings.seed, pp.gap, pp.r_min, pp.r_max, pp.offset, pp.disk_radius)
        pair = make_pair(g, spec)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    write_graph(pair.gt, args.out_gt)
    write_graph(pair.pred, args.out_pred)
    manifest = {
        "format": "roadmetrics.perturb/1",
        "spec": spec.as_dict(),
        "achieved": pair.achieved,
        "diagnostics": pair.diagnostics,
        "input": rep.graph_info(g, raw),
        "gt": rep.graph_info(pair.gt),
        "pred": rep.graph_info(pair.pred),
    }
    manifest_path = Path(args.manifest) if args.manifest else Path(args.out_pred).with_suffix(".manifest.json")
    manifest_path.write_text(rep.dumps_json(manifest), encoding="utf-8")
    if spec.kind != "node_noise" and pair.achieved < spec.severity:
        log.warning("only %s of %s requested %s fit into the graph", pair.achieved, spec.severity, spec.kind)
    if pair.diagnostics.get("breaks_on_cycles"):
        log.warning("%d breaks fell on cycles and did not disconnect the graph", pair.diagnostics["breaks_on_cycles"])
    return EXIT_OK


def cmd_sweep(args, config) -> int:
    settings = _settings(args, config)
    metrics = _metrics(args.metrics, config)
    sw = config.get("sweep", {})
    kind = args.kind or sw.get("kind")
    if kind not in KINDS:
        raise InputError(f"--kind must be one of {', '.join(KINDS)}")
    grid = _grid(args.grid) if args.grid else [float(x) for x in sw.get("grid", ())]
    n_seeds = args.seeds if args.seeds is not None else int(sw.get("seeds", 10))
    if args.synthetic:
        graphs = [synthetic_city(settings.seed + i) for i in range(args.synthetic)]
    else:
        graphs = [_read(p)[0] for p in args.inputs]
    if not graphs:
        raise InputError("no input graphs (give paths or --synthetic N)")
    try:
        result = rep.sweep(graphs, kind, grid, n_seeds, settings, metrics, args.threads)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out = Path(args.out)
    out.write_text(rep.dumps_json(result), encoding="utf-8")
    for m in metrics:
        out.with_name(f"{out.stem}.{m}.csv").write_text(rep.sweep_csv(result, m), encoding="utf-8")
    failed = sum(1 for c in result["cells"] if c["error"])
    if failed:
        log.warning("%d of %d cells reported errors", failed, len(result["cells"]))
    return EXIT_OK


def cmd_correlate(args, config) -> int:
    metrics = _metrics(args.metrics, config)
    rows = []
    paths = sorted(Path(args.report_dir).glob("*.json"))
    for p in paths:
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
            rows.extend(rep.summaries(doc))
        except (ValueError, KeyError, AttributeError):
            log.debug("skipping %s", p)
    try:
        result = rep.correlation_matrix(rows, metrics)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    Path(args.out).write_text(rep.dumps_json(result), encoding="utf-8")
    return EXIT_OK


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    # accepted both before and after the subcommand
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="base random seed")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker processes for sweeps")
    p.add_argument("--config", default=argparse.SUPPRESS, help="TOML or JSON settings file")
    p.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    return p


def _perturb_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gap", type=float, help="interruption length (m)")
    p.add_argument("--r-min", type=float, dest="r_min", help="shortest overconnection (m)")
    p.add_argument("--r-max", type=float, dest="r_max", help="longest overconnection (m)")
    p.add_argument("--offset", type=float, help="doubled road offset (m)")
    p.add_argument("--disk-radius", type=float, dest="disk_radius", help="removed disk radius (m)")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="roadmetrics", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    settings_help = "override one setting, e.g. path.n_pairs=200 (repeatable)"

    p = sub.add_parser("score", parents=[common], help="score a prediction against ground truth")
    p.add_argument("gt")
    p.add_argument("pred")
    p.add_argument("-m", "--metrics", help="comma-separated subset or 'all'")
    p.add_argument("-o", "--out", required=True, help="report JSON path")
    p.add_argument("--csv", help="append one row of scores to this CSV file")
    p.add_argument("--dump-dir", help="write CCQ masks, junction matches and subgraph logs here")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help=settings_help)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("perturb", parents=[common], help="make a (gt, pred) pair with injected errors")
    p.add_argument("input")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--severity", required=True, type=float)
    p.add_argument("--out-gt", required=True)
    p.add_argument("--out-pred", required=True)
    p.add_argument("--manifest", help="manifest path (default: next to --out-pred)")
    _perturb_flags(p)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("sweep", parents=[common], help="score pairs over a severity grid")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--synthetic", type=int, default=0, metavar="N", help="use N generated cities as inputs")
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--grid", help="comma-separated increasing severities")
    p.add_argument("--seeds", type=int, help="seeds per severity (default 10)")
    p.add_argument("-m", "--metrics", help="comma-separated subset or 'all'")
    p.add_argument("-o", "--out", required=True, help="sweep JSON path; per-metric CSVs are written beside it")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help=settings_help)
    _perturb_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("correlate", parents=[common], help="correlate metric summaries across reports")
    p.add_argument("report_dir")
    p.add_argument("-m", "--metrics", help="comma-separated subset or 'all'")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_correlate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    verbose = getattr(args, "verbose", 0)
    logging.basicConfig(level=logging.DEBUG if verbose > 1 else logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config) if getattr(args, "config", None) else {}
        args.seed = getattr(args, "seed", None)
        if args.seed is None and "seed" in config:
            args.seed = int(config["seed"])
        args.threads = getattr(args, "threads", None) or int(config.get("threads", 1))
        return args.func(args, config)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
