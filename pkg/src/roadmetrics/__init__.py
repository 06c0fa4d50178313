"""Scores for comparing a predicted road network with ground truth."""

from .graph import GeoGraph, GraphLocation, Path, load_graph, read_graph, save_graph, shortest_path, write_graph
from .junction import JunctionParams, junct_legacy, newj
from .path import PathParams, apls, newp, tlts
from .perturb import PerturbationSpec, make_pair
from .pixel import ccq, ccq_graphs, rasterize
from .report import METRICS, Settings, score_pair
from .subgraph import SubgraphParams, graph_legacy, hungarian, newg
from .synth import synthetic_city

__all__ = [
    "GeoGraph", "GraphLocation", "Path", "load_graph", "read_graph", "save_graph", "shortest_path", "write_graph",
    "JunctionParams", "junct_legacy", "newj",
    "PathParams", "apls", "newp", "tlts",
    "PerturbationSpec", "make_pair",
    "ccq", "ccq_graphs", "rasterize",
    "METRICS", "Settings", "score_pair",
    "SubgraphParams", "graph_legacy", "hungarian", "newg",
    "synthetic_city",
]
