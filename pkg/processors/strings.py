import itertools

import numpy as np

from models.errors import GraphMismatchError, OpenWordError, SystemSizeError
from models.fields import OpenString, StringField, TransportResult
from models.graph import VertexId
from processors.connection import renormalize
from utils.console import progress
from utils.linalg import max_abs, nullspace
from utils.settings import DEFAULTS

__all__ = [
    "transport_field",
    "check_half_flatness",
    "transport_word",
    "check_flatness",
    "flatness_system",
    "solve_flat_fields",
    "field_product",
    "open_string_space",
    "act_flat_field",
    "action_matrix",
    "embedding_matrix",
    "check_action_well_defined",
    "action_defects",
    "string_count",
]


def _require_field_on(f, graph):
    if not f.graph.same_edges(graph):
        raise GraphMismatchError(f"field lives on {f.graph.name}, expected {graph.name}")


def transport_field(f, w, tol=None):
    """T(xi, xi', s1, s2) = sum f(r1, r2) W(xi, r1, eta, s1) conj W(xi', r2, eta, s2).

    The field is transportable when T is diagonal in (xi, xi') and the diagonal does not
    depend on xi (over the xi with r(xi) = s(s1)).
    """
    tol = DEFAULTS.tol if tol is None else tol
    cfg = w.config
    _require_field_on(f, cfg.g1)
    values = np.einsum("ab,xaes,ybet->xyst", f.coeffs, w.values, w.values.conj())

    n0 = cfg.g0.num_edges
    off = values.copy()
    off[np.arange(n0), np.arange(n0)] = 0.0
    off_defect = max_abs(off)

    diagonal = values[np.arange(n0), np.arange(n0)]  # (xi, s1, s2)
    valid = cfg.g0.dst_array[:, None] == cfg.g3.src_array[None, :]  # (xi, s1)
    counts = valid.sum(axis=0)
    weights = valid / np.maximum(counts, 1)
    estimate = np.einsum("xs,xst->st", weights, diagonal)
    spread = np.where(valid[:, :, None], np.abs(diagonal - estimate[None]), 0.0)
    leak = np.where(cfg.g3.parallel_mask(), 0.0, np.abs(estimate))

    defect = off_defect + max_abs(spread) + max_abs(leak)
    field = StringField.from_matrix(cfg.g3, estimate) if defect < tol else None
    return TransportResult(values=values, defect=defect, field=field, estimate=estimate)


def check_half_flatness(f, w, tol=None):
    result = transport_field(f, w, tol)
    return result.transportable, result.field


def transport_word(f, word, tol=None):
    """Transport letter by letter; returns (flat, defect, final field or None)"""
    tol = DEFAULTS.tol if tol is None else tol
    current = f
    for letter in word.letters:
        result = transport_field(current, letter, tol)
        if not result.transportable:
            return False, result.defect, None
        current = result.field
    if not word.closed:
        return True, 0.0, current
    defect = max_abs(current.coeffs - f.coeffs)
    return defect < tol, defect, current


def _top_paths(word):
    """Composable top paths through the word, with parent index and last edge per step"""
    steps = []
    ends = [None]
    for letter in word.letters:
        g0 = letter.config.g0
        parents, edges, new_ends = [], [], []
        for p, end in enumerate(ends):
            for a in range(g0.num_edges):
                if end is None or g0.src[a] == end:
                    parents.append(p)
                    edges.append(a)
                    new_ends.append(g0.dst[a])
        steps.append((np.array(parents, dtype=int), np.array(edges, dtype=int)))
        ends = new_ends
    return steps, np.array(ends, dtype=int)


def _grid(word, coeffs, steps):
    state = np.asarray(coeffs, dtype=complex)[None, None]
    for letter, (parents, edges) in zip(word.letters, steps):
        upper = letter.values[edges]
        state = np.einsum(
            "PQrs,Prex,Qsey->PQxy",
            state[np.ix_(parents, parents)],
            upper,
            upper.conj(),
        )
    return state


def _flatness_target(word, coeffs, ends):
    right = word.right_graph
    valid = ends[:, None] == right.src_array[None, :]
    n = len(ends)
    return np.einsum("PQ,Px,xy->PQxy", np.eye(n), valid.astype(float), np.asarray(coeffs, dtype=complex))


def _require_closed(word, f=None):
    if not word.closed:
        raise OpenWordError("flatness needs a closed word (right vertical graph = left vertical graph)")
    if f is not None:
        _require_field_on(f, word.left_graph)


def check_flatness(f, word, tol=None):
    """Contract the two-row grid of the word against f and compare with delta x delta x f"""
    tol = DEFAULTS.tol if tol is None else tol
    _require_closed(word, f)
    steps, ends = _top_paths(word)
    grid = _grid(word, f.coeffs, steps)
    defect = max_abs(grid - _flatness_target(word, f.coeffs, ends))
    return defect < tol, defect


def flatness_system(word, cap=None):
    """Matrix of f -> grid(f) - delta x delta x f, one column per parallel pair of the left graph"""
    cap = DEFAULTS.dim_cap if cap is None else cap
    _require_closed(word)
    graph = word.left_graph
    pairs = graph.parallel_pairs()
    steps, ends = _top_paths(word)
    rows = (len(ends) ** 2) * graph.num_edges ** 2
    if rows * len(pairs) > cap * cap:
        raise SystemSizeError("flatness system", rows * len(pairs), cap * cap)
    columns = []
    for k1, k2 in pairs:
        unit = np.zeros((graph.num_edges,) * 2, dtype=complex)
        unit[k1, k2] = 1.0
        residual = _grid(word, unit, steps) - _flatness_target(word, unit, ends)
        columns.append(residual.ravel())
    return np.stack(columns, axis=1), pairs


def solve_flat_fields(word, tol=None, cap=None):
    """Orthonormal basis (Frobenius) of the flat fields of a closed word"""
    tol = DEFAULTS.tol if tol is None else tol
    cap = DEFAULTS.dim_cap if cap is None else cap
    system, _ = flatness_system(word, cap)
    basis = nullspace(system, tol, cap)
    graph = word.left_graph
    return [StringField.from_vector(graph, basis[:, k]) for k in range(basis.shape[1])]


def field_product(f, g):
    f.require_same_graph(g)
    return StringField(f.graph, f.coeffs @ g.coeffs)


def _paths(graph, start, length):
    """Alternating forward/reversed paths of the given length from start, lexicographic"""
    found = [((), start)]
    for step in range(length):
        nxt = []
        for edges, end in found:
            for k in range(graph.num_edges):
                if step % 2 == 0 and graph.src[k] == end:
                    nxt.append((edges + (k,), graph.dst[k]))
                elif step % 2 == 1 and graph.dst[k] == end:
                    nxt.append((edges + (k,), graph.src[k]))
        found = nxt
    return found


def _index(vertex):
    return vertex.index if isinstance(vertex, VertexId) else int(vertex)


def open_string_space(w, star0=0, star1=0, level=0, cap=None):
    """Basis strings of the given level, ordered by (top, bottom, vertical)"""
    cap = DEFAULTS.level_cap if cap is None else cap
    if level > cap:
        raise SystemSizeError("open string level", level, cap)
    cfg = w.config
    vertical = cfg.g1 if level % 2 == 0 else cfg.g3
    strings = []
    for top, top_end in _paths(cfg.g0, _index(star0), level):
        for bottom, bottom_end in _paths(cfg.g2, _index(star1), level):
            for k in range(vertical.num_edges):
                if vertical.src[k] == top_end and vertical.dst[k] == bottom_end:
                    strings.append(OpenString(top, bottom, k))
    return strings


def act_flat_field(f, s):
    """sum_i f(i, k) (s with its terminal edge k replaced by i), as {string: coefficient}"""
    k = s.vertical
    if k >= f.graph.num_edges:
        raise GraphMismatchError(f"terminal edge {k} is not an edge of {f.graph.name}")
    result = {}
    for i in range(f.graph.num_edges):
        c = f.coeffs[i, k]
        if c != 0:
            result[s.with_vertical(i)] = complex(c)
    return result


def action_matrix(f, strings):
    index = {s: n for n, s in enumerate(strings)}
    matrix = np.zeros((len(strings), len(strings)), dtype=complex)
    for n, s in enumerate(strings):
        for t, c in act_flat_field(f, s).items():
            matrix[index[t], n] += c
    return matrix


def embedding_matrix(w, lower, upper, level, prime=None):
    """Level -> level+1 embedding: s goes to sum W(eta', xi, eta, xi') (s + eta', eta, xi').

    Even levels read W, odd levels read its prime renormalization.
    """
    cell = w if level % 2 == 0 else (prime or renormalize(w, "prime"))
    index = {s: n for n, s in enumerate(upper)}
    matrix = np.zeros((len(upper), len(lower)), dtype=complex)
    for n, s in enumerate(lower):
        for t in upper:
            if t.top[:-1] != s.top or t.bottom[:-1] != s.bottom:
                continue
            c = cell.values[t.top[-1], s.vertical, t.bottom[-1], t.vertical]
            if c != 0:
                matrix[index[t], n] += c
    return matrix


def check_action_well_defined(f, w, level, tol=None, star0=0, star1=0, cap=None):
    """max |iota A_level(f) - A_level+1(f) iota|; odd levels act through the transported field"""
    tol = DEFAULTS.tol if tol is None else tol
    cap = DEFAULTS.level_cap if cap is None else cap
    _require_field_on(f, w.config.g1)
    if level + 1 > cap:
        raise SystemSizeError("open string level", level + 1, cap)
    ftilde = StringField.from_matrix(w.config.g3, transport_field(f, w, tol).estimate)
    lower = open_string_space(w, star0, star1, level, cap)
    upper = open_string_space(w, star0, star1, level + 1, cap)
    acting = (f, ftilde) if level % 2 == 0 else (ftilde, f)
    iota = embedding_matrix(w, lower, upper, level)
    left = iota @ action_matrix(acting[0], lower)
    right = action_matrix(acting[1], upper) @ iota
    return max_abs(left - right)


def action_defects(f, w, levels, tol=None, star0=0, star1=0):
    """Defect per level, with a progress bar"""
    return {
        level: check_action_well_defined(f, w, level, tol, star0, star1)
        for level in progress(levels, desc="levels")
    }


def string_count(w, star0, star1, level):
    """Number of basis strings: top paths x bottom paths x vertical edges, grouped by end vertices"""
    cfg = w.config
    vertical = cfg.g1 if level % 2 == 0 else cfg.g3
    tops = {}
    for _, end in _paths(cfg.g0, _index(star0), level):
        tops[end] = tops.get(end, 0) + 1
    bottoms = {}
    for _, end in _paths(cfg.g2, _index(star1), level):
        bottoms[end] = bottoms.get(end, 0) + 1
    rows, cols = (cfg.sizes[0], cfg.sizes[1]) if level % 2 == 0 else (cfg.sizes[3], cfg.sizes[2])
    mult = vertical.multiplicity(rows, cols)
    return int(sum(tops[x] * bottoms[y] * mult[x, y] for x, y in itertools.product(tops, bottoms)))
