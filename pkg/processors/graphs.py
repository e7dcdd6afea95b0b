import math

import networkx as nx
import numpy as np

from models.errors import ConfigStructureError, PFConvergenceError, PFInconsistencyError
from models.graph import (
    BASE_LAYERS,
    FAIL,
    PASS,
    WARN,
    BipartiteGraph,
    FourGraphConfig,
    PFData,
    ValidationReport,
)
from utils.console import warn
from utils.settings import DEFAULTS


def make_config(edges, sizes, labels=None, name="config"):
    """Build a base configuration from {"G0": [(src, dst), ...], ...} with integer vertex ids"""
    graphs = []
    for slot, (p_src, p_dst) in (("G0", (0, 3)), ("G1", (0, 1)), ("G2", (1, 2)), ("G3", (3, 2))):
        pairs = edges[slot]
        graphs.append(BipartiteGraph(
            name=slot,
            source_layer=BASE_LAYERS[p_src],
            range_layer=BASE_LAYERS[p_dst],
            src=tuple(int(s) for s, _ in pairs),
            dst=tuple(int(r) for _, r in pairs),
        ))
    return FourGraphConfig(*graphs, sizes=tuple(sizes), labels=labels, name=name)


def validate_config(cfg):
    """Check the standing assumptions on the four graphs"""
    cfg.check_structure()
    report = ValidationReport()

    empty = [p for p, n in enumerate(cfg.sizes) if n <= 0]
    report.add("nonempty_layers", FAIL if empty else PASS, offending=[cfg.layers[p] for p in empty])
    # check_structure already matched every slot to its layers
    report.add("layer_consistency", PASS)

    for slot, g, (p_src, p_dst) in (("G0", cfg.g0, (0, 3)), ("G2", cfg.g2, (1, 2))):
        graph = nx.MultiGraph()
        graph.add_nodes_from(("s", i) for i in range(cfg.sizes[p_src]))
        graph.add_nodes_from(("r", j) for j in range(cfg.sizes[p_dst]))
        graph.add_edges_from((("s", s), ("r", r)) for s, r in zip(g.src, g.dst))
        components = list(nx.connected_components(graph)) if graph.number_of_nodes() else []
        connected = len(components) == 1
        report.add(
            f"connected_{slot}",
            PASS if connected else FAIL,
            defect=max(len(components) - 1, 0),
            offending=[sorted(f"{side}{i}" for side, i in c) for c in components[1:]],
        )

    for slot, g in zip(("G0", "G1", "G2", "G3"), cfg.graphs):
        few = g.num_edges <= 1
        report.add(f"edge_count_{slot}", WARN if few else PASS, defect=g.num_edges)
        if few:
            warn(f"{slot} of {cfg.name} has {g.num_edges} edge(s); beta > 1 is not guaranteed")
    return report


def _pf_vector(delta, tol, max_iter):
    """PF eigenvector of the bipartite adjacency [[0, D], [D^T, 0]] by shifted power iteration"""
    n, m = delta.shape
    adjacency = np.zeros((n + m, n + m))
    adjacency[:n, n:] = delta
    adjacency[n:, :n] = delta.T
    shifted = adjacency + np.eye(n + m)
    vec = np.ones(n + m) / math.sqrt(n + m)
    for _ in range(max_iter):
        nxt = shifted @ vec
        nxt /= np.linalg.norm(nxt)
        if np.abs(nxt - vec).max() < tol * 1e-3:
            vec = nxt
            break
        vec = nxt
    else:
        raise PFConvergenceError(f"power iteration did not converge in {max_iter} steps")
    beta = float(vec @ adjacency @ vec)
    return vec[:n], vec[n:], beta


def balance_residuals(cfg, pf):
    """Max residual of each of the eight balance equations, keyed by graph and side"""
    mu = pf.mu
    residuals = {}
    for slot, g, (p, q), beta in (
        ("G0", cfg.g0, (0, 3), pf.beta0),
        ("G2", cfg.g2, (1, 2), pf.beta0),
        ("G1", cfg.g1, (0, 1), pf.beta1),
        ("G3", cfg.g3, (3, 2), pf.beta1),
    ):
        delta = g.multiplicity(cfg.sizes[p], cfg.sizes[q])
        residuals[f"{slot}_range"] = float(np.abs(delta.T @ mu[p] - beta * mu[q]).max())
        residuals[f"{slot}_source"] = float(np.abs(delta @ mu[q] - beta * mu[p]).max())
    return residuals


def compute_pf(cfg, tol=None, max_iter=None):
    """Joint Perron-Frobenius weights, normalized to mu = 1 at the first V0 vertex"""
    tol = DEFAULTS.pf_tol if tol is None else tol
    max_iter = DEFAULTS.pf_max_iter if max_iter is None else max_iter

    report = validate_config(cfg)
    if not report.passed:
        names = ", ".join(c.name for c in report.failures)
        raise ConfigStructureError(f"configuration {cfg.name} fails validation: {names}")

    n = cfg.sizes
    mu0, mu3, beta_top = _pf_vector(cfg.g0.multiplicity(n[0], n[3]), tol, max_iter)
    mu1, mu2, beta_bottom = _pf_vector(cfg.g2.multiplicity(n[1], n[2]), tol, max_iter)
    if abs(beta_top - beta_bottom) > tol:
        raise PFInconsistencyError("G0 and G2 have different PF eigenvalues", abs(beta_top - beta_bottom))

    # Fix the scale t of (mu1, mu2) and beta1 from G1: D1^T mu0 = beta1 t mu1, D1 t mu1 = beta1 mu0
    delta1 = cfg.g1.multiplicity(n[0], n[1])
    up = float(np.mean((delta1.T @ mu0) / mu1))
    down = float(np.mean((delta1 @ mu1) / mu0))
    if up <= 0 or down <= 0:
        raise PFInconsistencyError("G1 does not couple the two PF blocks", float("inf"))
    beta1 = math.sqrt(up * down)
    scale = math.sqrt(up / down)

    norm = mu0[0]
    mu = (mu0 / norm, mu1 * scale / norm, mu2 * scale / norm, mu3 / norm)
    mu[0][0] = 1.0
    pf = PFData(mu=mu, beta0=beta_top, beta1=beta1, tol=tol)

    residuals = balance_residuals(cfg, pf)
    worst = max(residuals.values())
    if worst >= tol:
        raise PFInconsistencyError(
            f"no joint mu for {cfg.name}: {max(residuals, key=residuals.get)} fails", worst
        )
    return pf


def builtin_example(example_id, n=None):
    """Configurations of the two worked examples, the Hadamard spin model and the parallel model"""
    if isinstance(example_id, str) and example_id.startswith(("hadamard(", "parallel(")):
        example_id, n = example_id[:-1].split("(")
        n = int(n)
    if example_id == "example1":
        return _example1()
    if example_id == "example2":
        return _example2()
    if example_id in ("hadamard", "parallel"):
        if n is None or n < 2:
            raise ValueError(f"{example_id} needs n >= 2, got {n}")
        return _hadamard(n) if example_id == "hadamard" else _parallel(n)
    raise ValueError(f"unknown example id: {example_id}")


def _from_labels(edges, layers, name):
    """Edges given by figure labels; layers maps position -> ordered label list"""
    index = [{label: i for i, label in enumerate(layer)} for layer in layers]
    slots = {"G0": (0, 3), "G1": (0, 1), "G2": (1, 2), "G3": (3, 2)}
    numeric = {
        slot: [(index[slots[slot][0]][s], index[slots[slot][1]][r]) for s, r in pairs]
        for slot, pairs in edges.items()
    }
    labels = tuple(tuple(str(label) for label in layer) for layer in layers)
    return make_config(numeric, [len(layer) for layer in layers], labels=labels, name=name)


def _example1():
    layers = ([1, 2, 3], [6, 7], [8, 9, 10], [4, 5])
    edges = {
        "G0": [(1, 4), (2, 4), (2, 5), (3, 5)],
        "G1": [(1, 6), (2, 6), (2, 7), (3, 7)],
        "G2": [(6, 8), (6, 9), (7, 9), (7, 10)],
        "G3": [(4, 8), (4, 9), (5, 9), (5, 10)],
    }
    return _from_labels(edges, layers, "example1")


def _example2():
    layers = ([1, 2, 3, 4, 5, 6], [12, 13, 14], [15, 16, 17], [7, 8, 9, 10, 11])
    edges = {
        "G0": [(1, 7), (2, 7), (2, 8), (3, 8), (3, 9), (4, 9), (4, 10), (5, 10), (5, 11), (6, 11)],
        "G1": [(1, 12), (4, 12), (4, 13), (2, 13), (5, 13), (3, 13), (3, 14), (6, 14)],
        "G2": [(12, 15), (13, 15), (13, 16), (13, 17), (14, 17)],
        "G3": [(7, 15), (10, 15), (10, 16), (9, 15), (9, 17), (8, 16), (8, 17), (11, 17)],
    }
    return _from_labels(edges, layers, "example2")


def _hadamard(n):
    # Spin model: one vertex in V0 and V2, n in V1 and V3
    edges = {
        "G0": [(0, j) for j in range(n)],
        "G1": [(0, i) for i in range(n)],
        "G2": [(i, 0) for i in range(n)],
        "G3": [(j, 0) for j in range(n)],
    }
    return make_config(edges, (1, n, 1, n), name=f"hadamard({n})")


def _parallel(n):
    edges = {"G0": [(0, 0)], "G1": [(0, 0)] * n, "G2": [(0, 0)], "G3": [(0, 0)] * n}
    return make_config(edges, (1, 1, 1, 1), name=f"parallel({n})")


def permute_config(cfg, rng):
    """Randomly relabel vertices and edges; returns (config, vertex perms, edge perms).

    Vertex perms map old index -> new index; edge perms list old ids in new order.
    """
    vperm = [rng.permutation(size) for size in cfg.sizes]
    eperm = [rng.permutation(g.num_edges) for g in cfg.graphs]
    edges = {}
    for slot, g, order, (p, q) in zip(
        ("G0", "G1", "G2", "G3"), cfg.graphs, eperm, ((0, 3), (0, 1), (1, 2), (3, 2))
    ):
        edges[slot] = [(vperm[p][g.src[k]], vperm[q][g.dst[k]]) for k in order]
    return make_config(edges, cfg.sizes, name=cfg.name + "~perm"), vperm, eperm
