import json
import os

import numpy as np

from models.connection import Connection
from models.errors import BiconnectError, FixtureError
from models.fields import StringField
from models.graph import GRAPH_SLOTS, BipartiteGraph, FourGraphConfig, PFData
from models.tensor import FourTensor
from processors.graphs import balance_residuals, builtin_example, compute_pf
from processors.tensor4 import connection_to_tensor, tensor_to_connection
from utils.settings import DEFAULTS

SCHEMA = "biconnect/1"


def _complex(entry, location):
    try:
        return complex(float(entry.get("re", 0.0)), float(entry.get("im", 0.0)))
    except (TypeError, ValueError, AttributeError):
        raise FixtureError("complex numbers need numeric 're' and 'im'", location) from None


def _pair(z):
    return {"re": float(np.real(z)), "im": float(np.imag(z))}


def resolve_path(name, base_dir=None, settings=DEFAULTS):
    """A path as given, else relative to base_dir, else inside the fixture directory"""
    for candidate in (name, os.path.join(base_dir or "", name), os.path.join(settings.fixtures_dir, name)):
        if os.path.exists(candidate):
            return candidate
    raise FixtureError(f"fixture not found: {name}")


def load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise FixtureError(f"invalid JSON: {e.msg}", f"{path}:{e.lineno}:{e.colno}") from None
    except OSError as e:
        raise FixtureError(f"cannot read fixture: {e.strerror}", path) from None
    return check_document(data, path)


def check_document(data, location):
    """A parsed fixture must be a JSON object of the supported schema"""
    if not isinstance(data, dict):
        raise FixtureError("a fixture must be a JSON object", location)
    schema = data.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise FixtureError(f"unsupported schema {schema!r}", f"{location}:schema")
    return data


def save_json(data, path=None):
    """Write to path, or return the text when path is None"""
    payload = {"schema": SCHEMA, **data}
    text = json.dumps(payload, indent=2, ensure_ascii=False)
    if path is None:
        return text
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text + "\n")
    return text


# Configurations


def config_to_dict(cfg, pf=None):
    layers = {}
    for p, layer in enumerate(cfg.layers):
        layers[layer] = [cfg.label(p, i) if cfg.labels else str(i) for i in range(cfg.sizes[p])]
    graphs = {}
    for slot, g in zip(GRAPH_SLOTS, cfg.graphs):
        p_src, p_dst = GRAPH_SLOTS[slot]
        graphs[slot] = [
            {"id": k, "src": layers[cfg.layers[p_src]][s], "dst": layers[cfg.layers[p_dst]][r]}
            for k, (s, r) in enumerate(zip(g.src, g.dst))
        ]
    data = {"kind": "config", "name": cfg.name, "layers": layers, "graphs": graphs}
    if pf is not None:
        data["mu"] = {layer: [float(m) for m in pf.mu[p]] for p, layer in enumerate(cfg.layers)}
        data["beta0"] = float(pf.beta0)
        data["beta1"] = float(pf.beta1)
    return data


def _pf_from_dict(data, cfg, location, tol):
    """Stored weights, accepted only when positive and balanced on all four graphs"""
    try:
        mu = tuple(np.array([float(m) for m in data["mu"][layer]]) for layer in cfg.layers)
        pf = PFData(mu=mu, beta0=float(data["beta0"]), beta1=float(data["beta1"]))
    except (KeyError, TypeError, ValueError):
        raise FixtureError("'mu' needs one list per layer plus 'beta0' and 'beta1'", f"{location}.mu") from None
    if any(m.shape != (n,) for m, n in zip(mu, cfg.sizes)):
        raise FixtureError("'mu' lists do not match the layer sizes", f"{location}.mu")
    if any(np.any(m <= 0) for m in mu) or pf.beta0 <= 0 or pf.beta1 <= 0:
        raise FixtureError("PF weights must be positive", f"{location}.mu")
    residuals = balance_residuals(cfg, pf)
    worst = max(residuals, key=residuals.get)
    if residuals[worst] >= tol:
        raise FixtureError(f"stored weights fail {worst} (residual {residuals[worst]:.3e})", f"{location}.mu")
    return pf


def config_from_dict(data, location="config", tol=None):
    """(config, pf or None) from a fixture object"""
    tol = DEFAULTS.tol if tol is None else tol
    layer_map = data.get("layers") if isinstance(data, dict) else None
    graph_map = data.get("graphs") if isinstance(data, dict) else None
    if not isinstance(layer_map, dict) or not isinstance(graph_map, dict):
        raise FixtureError("a configuration needs 'layers' and 'graphs' objects", location)
    layers = tuple(layer_map) if len(layer_map) == 4 else None
    if layers is None:
        raise FixtureError(f"expected four layers, got {len(layer_map)}", f"{location}.layers")
    if not all(isinstance(layer_map[layer], list) for layer in layers):
        raise FixtureError("each layer must list its vertex labels", f"{location}.layers")
    names = [[str(v) for v in layer_map[layer]] for layer in layers]
    index = [{name: i for i, name in enumerate(layer)} for layer in names]

    graphs = []
    for slot, (p_src, p_dst) in GRAPH_SLOTS.items():
        entries = graph_map.get(slot)
        if entries is None:
            raise FixtureError(f"missing graph {slot}", f"{location}.graphs")
        if not isinstance(entries, list) or not all(isinstance(e, dict) for e in entries):
            raise FixtureError(f"{slot} must be a list of edge objects", f"{location}.graphs.{slot}")
        entries = sorted(entries, key=lambda e: e.get("id", 0))
        ids = [e.get("id", k) for k, e in enumerate(entries)]
        if ids != list(range(len(entries))):
            raise FixtureError(f"edge ids of {slot} must be 0..{len(entries) - 1}", f"{location}.graphs.{slot}")
        src, dst = [], []
        for k, e in enumerate(entries):
            here = f"{location}.graphs.{slot}[{k}]"
            try:
                src.append(index[p_src][str(e["src"])])
                dst.append(index[p_dst][str(e["dst"])])
            except KeyError as missing:
                raise FixtureError(f"unknown vertex {missing}", here) from None
        graphs.append(BipartiteGraph(slot, layers[p_src], layers[p_dst], tuple(src), tuple(dst)))

    cfg = FourGraphConfig(
        *graphs,
        sizes=tuple(len(layer) for layer in names),
        layers=layers,
        labels=tuple(tuple(layer) for layer in names),
        name=data.get("name", "config"),
    )
    cfg.check_structure()
    pf = _pf_from_dict(data, cfg, location, tol) if "mu" in data else None
    return cfg, pf


def load_config(path):
    return config_from_dict(load_json(path), path)


def _resolve_config(ref, base_dir, location):
    if isinstance(ref, dict):
        return config_from_dict(ref, location)
    if isinstance(ref, str) and ref.startswith("example:"):
        try:
            return builtin_example(ref[len("example:"):]), None
        except ValueError as e:
            raise FixtureError(str(e), location) from None
    if isinstance(ref, str):
        return load_config(resolve_path(ref, base_dir))
    raise FixtureError("'config' must be an object, a file name or example:<id>", location)


# Connections and 4-tensors


def connection_to_dict(w, normalization="connection", config_ref=None):
    values = w.values
    if normalization == "tensor":
        values = connection_to_tensor(w).values
    entries = [
        {"cell": [int(k) for k in idx], **_pair(values[tuple(idx)])}
        for idx in np.argwhere(np.abs(values) > 0)
    ]
    return {
        "kind": "connection",
        "normalization": normalization,
        "config": config_ref or config_to_dict(w.config, w.pf),
        "values": entries,
    }


def connection_from_dict(data, base_dir=None, location="connection"):
    """Connection (converted from the 4-tensor normalization when flagged)"""
    if not isinstance(data, dict) or "config" not in data or "values" not in data:
        raise FixtureError("a connection needs 'config' and 'values'", location)
    if not isinstance(data["values"], list):
        raise FixtureError("'values' must be a list of cell entries", f"{location}.values")
    cfg, pf = _resolve_config(data["config"], base_dir, f"{location}.config")
    try:
        pf = pf or compute_pf(cfg)
    except BiconnectError as e:
        raise FixtureError(f"no PF data: {e}", f"{location}.config") from None

    values = np.zeros(cfg.edge_counts, dtype=complex)
    for k, entry in enumerate(data["values"]):
        here = f"{location}.values[{k}]"
        cell = entry.get("cell") if isinstance(entry, dict) else None
        if not isinstance(cell, list) or len(cell) != 4 or not all(isinstance(e, int) for e in cell):
            raise FixtureError("'cell' must list four integer edge ids", here)
        if any(not (0 <= e < n) for e, n in zip(cell, cfg.edge_counts)):
            raise FixtureError(f"edge id out of range in cell {cell}", here)
        z = _complex(entry, here)
        if z != 0 and not cfg.is_cell(*cell):
            raise FixtureError(f"nonzero value on non-matching cell {cell}", here)
        values[tuple(int(e) for e in cell)] = z

    normalization = data.get("normalization", "connection")
    if normalization == "tensor":
        return tensor_to_connection(FourTensor.from_array(cfg, pf, values))
    if normalization != "connection":
        raise FixtureError(f"unknown normalization {normalization!r}", f"{location}.normalization")
    return Connection.from_array(cfg, pf, values)


def load_connection(path, settings=DEFAULTS):
    path = resolve_path(path, settings=settings)
    return connection_from_dict(load_json(path), os.path.dirname(path), path)


def save_connection(w, path, normalization="connection"):
    return save_json(connection_to_dict(w, normalization), path)


# Fields, bases and reports


def field_to_dict(f):
    entries = [
        {"rho1": int(k1), "rho2": int(k2), **_pair(f.coeffs[k1, k2])}
        for k1, k2 in f.graph.parallel_pairs()
        if f.coeffs[k1, k2] != 0
    ]
    return {"kind": "field", "graph": f.graph.name, "coeffs": entries}


def field_from_dict(data, config, location="field"):
    if not isinstance(data, dict):
        raise FixtureError("a field must be a JSON object", location)
    slot = str(data.get("graph", "G1"))
    slots = dict(zip(GRAPH_SLOTS, config.graphs))
    graph = slots.get(slot) or next((g for g in config.graphs if g.name == slot), None)
    if graph is None:
        raise FixtureError(f"unknown graph {slot!r}", f"{location}.graph")
    entries = data.get("coeffs", [])
    if not isinstance(entries, list):
        raise FixtureError("'coeffs' must be a list", f"{location}.coeffs")
    coeffs = np.zeros((graph.num_edges,) * 2, dtype=complex)
    parallel = graph.parallel_mask()
    for k, entry in enumerate(entries):
        here = f"{location}.coeffs[{k}]"
        try:
            k1, k2 = int(entry["rho1"]), int(entry["rho2"])
        except (KeyError, TypeError, ValueError):
            raise FixtureError("coefficients need integer 'rho1' and 'rho2'", here) from None
        if not (0 <= k1 < graph.num_edges and 0 <= k2 < graph.num_edges) or not parallel[k1, k2]:
            raise FixtureError(f"({k1}, {k2}) is not a pair of parallel edges of {graph.name}", here)
        coeffs[k1, k2] = _complex(entry, here)
    return StringField(graph, coeffs)


def load_field(path, config, settings=DEFAULTS):
    path = resolve_path(path, settings=settings)
    return field_from_dict(load_json(path), config, path)


def basis_to_dict(basis, defects=None):
    return {
        "kind": "flat_basis",
        "dimension": len(basis),
        "defects": [float(d) for d in (defects or [])],
        "fields": [field_to_dict(f) for f in basis],
    }
