from dataclasses import replace

import numpy as np

from models.connection import Connection, GaugePair
from models.errors import GaugeError, GraphMismatchError
from models.graph import FAIL, PASS, BipartiteGraph, FourGraphConfig, PFData, ValidationReport
from processors.graphs import builtin_example, compute_pf
from utils.linalg import nullspace, unitarity_defect
from utils.settings import DEFAULTS

# Position order of the reflected configurations: new position p holds old position order[p]
REFLECTIONS = {
    "prime": (3, 2, 1, 0),
    "bar": (1, 0, 3, 2),
    "bar_prime": (2, 3, 0, 1),
}


def check_unitarity(w, tol=None):
    """Blockwise unitarity: rows (xi1, xi2), columns (xi0, xi3) per corner pair (x0, x2)"""
    tol = DEFAULTS.tol if tol is None else tol
    cfg = w.config
    worst, offending, misshapen = 0.0, [], []
    for x0 in range(cfg.sizes[0]):
        for x2 in range(cfg.sizes[2]):
            rows, cols, matrix = w.block(x0, x2)
            if not rows and not cols:
                continue
            if len(rows) != len(cols):
                misshapen.append((x0, x2))
                continue
            defect = unitarity_defect(matrix)
            worst = max(worst, defect)
            if defect >= tol:
                offending.append((x0, x2))
    report = ValidationReport()
    report.add("block_shape", FAIL if misshapen else PASS, defect=len(misshapen), offending=misshapen)
    report.add("unitarity", FAIL if offending else PASS, defect=worst, offending=offending)
    return report


def mu_factor(w):
    """sqrt(mu(s(xi0)) mu(r(xi2)) / (mu(r(xi0)) mu(s(xi2)))) over (e0, e2)"""
    pf = w.require_pf()
    g0, g2 = w.config.g0, w.config.g2
    top = pf.mu[0][g0.src_array] / pf.mu[3][g0.dst_array]
    bottom = pf.mu[2][g2.dst_array] / pf.mu[1][g2.src_array]
    return np.sqrt(top[:, None] * bottom[None, :])


# The lower row of a transport grid carries the same weight
kappa_weights = mu_factor


def reflect_config(cfg, mode):
    g0, g1, g2, g3 = cfg.graphs
    if mode == "prime":
        graphs = (g0.reverse(), g3, g2.reverse(), g1)
    elif mode == "bar":
        graphs = (g2, g1.reverse(), g0, g3.reverse())
    elif mode == "bar_prime":
        graphs = (g2.reverse(), g3.reverse(), g0.reverse(), g1.reverse())
    else:
        raise ValueError(f"unknown renormalization mode: {mode}")
    order = REFLECTIONS[mode]
    labels = None if cfg.labels is None else tuple(cfg.labels[p] for p in order)
    return FourGraphConfig(
        *graphs,
        sizes=tuple(cfg.sizes[p] for p in order),
        layers=tuple(cfg.layers[p] for p in order),
        labels=labels,
        name=f"{cfg.name}/{mode}",
    )


def renormalize(w, mode):
    """W' (prime), W-bar (bar) or W-bar' (bar_prime) on the reflected configuration"""
    pf = w.require_pf()
    cfg = reflect_config(w.config, mode)
    if mode == "prime":
        values = (mu_factor(w)[:, None, :, None] * w.values.conj()).transpose(0, 3, 2, 1)
    elif mode == "bar":
        values = (mu_factor(w)[:, None, :, None] * w.values.conj()).transpose(2, 1, 0, 3)
    else:
        values = w.values.transpose(2, 3, 0, 1)
    return Connection.from_array(cfg, pf.permuted(REFLECTIONS[mode]), values)


def mirror_value(w, e0, e1, e2, e3):
    """Cell read with both horizontal edges reversed (left xi3, right xi1): conj W"""
    return w.value(e0, e1, e2, e3).conjugate()


def flip_value(w, e0, e1, e2, e3):
    """Cell read with reversed horizontal edges but xi1 kept on the left: the mu factor times W"""
    return mu_factor(w)[e0, e2] * w.value(e0, e1, e2, e3)


def check_biunitarity(w, tol=None):
    report = check_unitarity(w, tol)
    return report.merged(check_unitarity(renormalize(w, "prime"), tol), prefix="prime_")


def gauge_transform(w, g, tol=None):
    """W1(x0, x1, x2, x3) = sum U[x1, x1'] W(x0, x1', x2, x3') V[x3', x3]"""
    tol = DEFAULTS.tol if tol is None else tol
    g.check_support(w.config)
    defect = g.unitarity_defect()
    if defect > tol:
        raise GaugeError(f"gauge blocks are not unitary (defect {defect:.3e})")
    values = np.einsum("ab,xbyc,cd->xayd", g.u, w.values, g.v)
    return Connection.from_array(w.config, w.pf, values)


def _fresh(names):
    names = list(names)
    for k in range(len(names)):
        while names[k] in names[:k]:
            names[k] += "'"
    return tuple(names)


def _relayer(graph, source_layer, range_layer):
    return replace(graph, source_layer=source_layer, range_layer=range_layer)


def compose_graphs(upper, lower, source_layer, range_layer):
    """Length-two vertical paths (upper edge, then lower edge)"""
    parts = tuple(
        (a, b)
        for a in range(upper.num_edges)
        for b in range(lower.num_edges)
        if upper.dst[a] == lower.src[b]
    )
    return BipartiteGraph(
        name=f"{upper.name}*{lower.name}",
        source_layer=source_layer,
        range_layer=range_layer,
        src=tuple(upper.src[a] for a, _ in parts),
        dst=tuple(lower.dst[b] for _, b in parts),
        parts=parts,
    )


def _require_close(a, b, tol, what):
    if a.shape != b.shape or (a.size and np.abs(a - b).max() > tol):
        raise GraphMismatchError(f"{what} differ beyond {tol:.1e}")


def product(w1, w2, tol=None):
    """Vertical product: w2 stacked under w1, summed over the shared middle edge"""
    tol = DEFAULTS.tol if tol is None else tol
    c1, c2 = w1.config, w2.config
    if not c1.g2.same_edges(c2.g0) or c1.sizes[1] != c2.sizes[0] or c1.sizes[2] != c2.sizes[3]:
        raise GraphMismatchError("bottom graph of the first connection is not the top graph of the second")
    pf1, pf2 = w1.require_pf(), w2.require_pf()
    _require_close(pf1.mu[1], pf2.mu[0], tol, "mu on the shared left layer")
    _require_close(pf1.mu[2], pf2.mu[3], tol, "mu on the shared right layer")
    if abs(pf1.beta0 - pf2.beta0) > tol:
        raise GraphMismatchError("horizontal PF eigenvalues differ")

    layers = _fresh((c1.layers[0], c2.layers[1], c2.layers[2], c1.layers[3]))
    left = compose_graphs(c1.g1, c2.g1, layers[0], layers[1])
    right = compose_graphs(c1.g3, c2.g3, layers[3], layers[2])
    cfg = FourGraphConfig(
        _relayer(c1.g0, layers[0], layers[3]),
        left,
        _relayer(c2.g2, layers[1], layers[2]),
        right,
        sizes=(c1.sizes[0], c2.sizes[1], c2.sizes[2], c1.sizes[3]),
        layers=layers,
        name=f"{c1.name}*{c2.name}",
    )
    a1 = [a for a, _ in left.parts]
    b1 = [b for _, b in left.parts]
    a3 = [a for a, _ in right.parts]
    b3 = [b for _, b in right.parts]
    upper = w1.values[:, a1][:, :, :, a3]
    lower = w2.values[:, b1][:, :, :, b3]
    values = np.einsum("akbl,bkcl->akcl", upper, lower)
    pf = PFData(
        mu=(pf1.mu[0], pf2.mu[1], pf2.mu[2], pf1.mu[3]),
        beta0=pf1.beta0,
        beta1=pf1.beta1 * pf2.beta1,
        tol=max(pf1.tol, pf2.tol),
    )
    return Connection.from_array(cfg, pf, values)


def trivial_connection(w):
    """Identity layer under w: top and bottom are w's bottom graph, vertical graphs are identities"""
    cfg, pf = w.config, w.require_pf()
    g2 = cfg.g2
    layers = _fresh((cfg.layers[1], cfg.layers[1], cfg.layers[2], cfg.layers[2]))
    n1, n2 = cfg.sizes[1], cfg.sizes[2]
    left = BipartiteGraph("I1", layers[0], layers[1], tuple(range(n1)), tuple(range(n1)))
    right = BipartiteGraph("I2", layers[3], layers[2], tuple(range(n2)), tuple(range(n2)))
    trivial = FourGraphConfig(
        _relayer(g2, layers[0], layers[3]),
        left,
        _relayer(g2, layers[1], layers[2]),
        right,
        sizes=(n1, n1, n2, n2),
        layers=layers,
        name=f"trivial({cfg.name})",
    )
    values = np.zeros(trivial.edge_counts, dtype=complex)
    for e in range(g2.num_edges):
        values[e, g2.src[e], e, g2.dst[e]] = 1.0
    trivial_pf = PFData(mu=(pf.mu[1], pf.mu[1], pf.mu[2], pf.mu[2]), beta0=pf.beta0, beta1=1.0, tol=pf.tol)
    return Connection.from_array(trivial, trivial_pf, values)


def direct_sum(w1, w2, tol=None):
    """W1 + W2 on the sum graphs of the vertical sides; mixed cells are 0"""
    tol = DEFAULTS.tol if tol is None else tol
    c1, c2 = w1.config, w2.config
    if c1.sizes != c2.sizes or not c1.g0.same_edges(c2.g0) or not c1.g2.same_edges(c2.g2):
        raise GraphMismatchError("direct sum needs the same horizontal graphs and layers")
    pf1, pf2 = w1.require_pf(), w2.require_pf()
    for p in range(4):
        _require_close(pf1.mu[p], pf2.mu[p], tol, f"mu on position {p}")

    def join(a, b):
        return BipartiteGraph(
            name=f"{a.name}+{b.name}",
            source_layer=a.source_layer,
            range_layer=a.range_layer,
            src=a.src + b.src,
            dst=a.dst + b.dst,
        )

    cfg = FourGraphConfig(
        c1.g0, join(c1.g1, c2.g1), c1.g2, join(c1.g3, c2.g3),
        sizes=c1.sizes, layers=c1.layers, labels=c1.labels, name=f"{c1.name}+{c2.name}",
    )
    n1, n3 = c1.g1.num_edges, c1.g3.num_edges
    values = np.zeros(cfg.edge_counts, dtype=complex)
    values[:, :n1, :, :n3] = w1.values
    values[:, n1:, :, n3:] = w2.values
    pf = PFData(mu=pf1.mu, beta0=pf1.beta0, beta1=pf1.beta1 + pf2.beta1, tol=pf1.tol)
    return Connection.from_array(cfg, pf, values)


def intertwiner_space(w1, w2, tol=None, cap=None):
    """Basis of pairs (u, v) with u W2 = W1 v, u on left edges and v on right edges.

    The equation reads sum_{x1'} u[x1, x1'] W2(x0, x1', x2, x3) = sum_{x3'} W1(x0, x1, x2, x3') v[x3', x3].
    A unitary gauge W1 = U W2 V gives the intertwiner (U, V*).
    """
    tol = DEFAULTS.tol if tol is None else tol
    cap = DEFAULTS.dim_cap if cap is None else cap
    if w1.config != w2.config:
        raise GraphMismatchError("intertwiners need connections on the same configuration")
    cfg = w1.config
    mask = cfg.cell_mask
    left_pairs = cfg.g1.parallel_pairs()
    right_pairs = cfg.g3.parallel_pairs()

    columns = []
    for b, b_prime in left_pairs:
        full = np.zeros(cfg.edge_counts, dtype=complex)
        full[:, b, :, :] = w2.values[:, b_prime, :, :]
        columns.append(full[mask])
    for d_prime, d in right_pairs:
        full = np.zeros(cfg.edge_counts, dtype=complex)
        full[:, :, :, d] = -w1.values[:, :, :, d_prime]
        columns.append(full[mask])
    system = np.stack(columns, axis=1)
    basis = nullspace(system, tol, cap)

    n1, n3 = cfg.g1.num_edges, cfg.g3.num_edges
    pairs = []
    for k in range(basis.shape[1]):
        vec = basis[:, k]
        u = np.zeros((n1, n1), dtype=complex)
        v = np.zeros((n3, n3), dtype=complex)
        for (b, b_prime), c in zip(left_pairs, vec[: len(left_pairs)]):
            u[b, b_prime] = c
        for (d_prime, d), c in zip(right_pairs, vec[len(left_pairs):]):
            v[d_prime, d] = c
        pairs.append(GaugePair(u=u, v=v))
    return pairs


def is_irreducible(w, tol=None, cap=None):
    return len(intertwiner_space(w, w, tol, cap)) == 1


def fourier_matrix(n):
    phase = 2.0j * np.pi / n
    rows, cols = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.exp(phase * rows * cols) / np.sqrt(n)


def random_unitary(n, rng):
    """Haar-distributed unitary from the QR decomposition of a complex Gaussian matrix"""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_gauge(cfg, rng):
    """Independent random unitary on each block of parallel vertical edges"""
    mats = []
    for g in (cfg.g1, cfg.g3):
        mat = np.zeros((g.num_edges, g.num_edges), dtype=complex)
        blocks = {}
        for k in range(g.num_edges):
            blocks.setdefault((g.src[k], g.dst[k]), []).append(k)
        for _, members in sorted(blocks.items()):
            mat[np.ix_(members, members)] = random_unitary(len(members), rng)
        mats.append(mat)
    return GaugePair(u=mats[0], v=mats[1])


def hadamard_connection(h):
    """Spin-model connection W(j, i, i, j) = h[i, j] on hadamard(n)"""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 2:
        raise GraphMismatchError(f"need an n x n matrix with n >= 2, got shape {h.shape}")
    n = h.shape[0]
    cfg = builtin_example("hadamard", n)
    values = np.zeros(cfg.edge_counts, dtype=complex)
    for i in range(n):
        for j in range(n):
            values[j, i, i, j] = h[i, j]
    return Connection.from_array(cfg, compute_pf(cfg), values)


def parallel_connection(u):
    """W(0, i, 0, j) = u[i, j] on the single-vertex configuration parallel(n)"""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] < 2:
        raise GraphMismatchError(f"need an n x n matrix with n >= 2, got shape {u.shape}")
    cfg = builtin_example("parallel", u.shape[0])
    values = u.reshape(1, *u.shape, 1).transpose(0, 1, 3, 2)
    return Connection.from_array(cfg, compute_pf(cfg), values)
