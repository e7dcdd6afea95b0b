"""2-tensors and the zipper side of the flat-field equivalence.

Matrix convention for a 2-tensor F[row, col] on a vertical graph:

* on a left leg, F maps the boundary edge (row) into the tensor leg (col):
  sum_rho F[rho3, rho] a(xi, rho, eta, sigma);
* on a right leg, F maps the tensor leg (row) into the boundary edge (col):
  sum_sigma a(xi, rho, eta, sigma) F[sigma, sigma1].

With two parallel edges p, q and F = [[1, 2], [0, 1]], the left application sends the cell
reading a(., q, ., .) to a(., q, ., .) and the cell reading a(., p, ., .) to
a(., p, ., .) + 2 a(., q, ., .); the right application sends a(., ., ., q) to
2 a(., ., ., p) + a(., ., ., q).
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from models.connection import Connection
from models.errors import GraphMismatchError, MissingPFDataError, OpenWordError
from models.fields import ConnectionWord, StringField, TheoremReport, TwoTensor
from models.graph import BASE_LAYERS
from processors.strings import check_flatness, solve_flat_fields, transport_field
from processors.tensor4 import connection_to_tensor, tensor_to_connection
from utils.console import ok, progress, say, warn
from utils.linalg import max_abs
from utils.settings import DEFAULTS


def _leg_ratio(graph, pf, config, leg, weighting):
    """mu(r)/mu(s) per edge for a left leg, mu(s)/mu(r) for a right leg; 1 when unweighted"""
    if weighting == "unit":
        return np.ones(graph.num_edges)
    if pf is None:
        raise MissingPFDataError(f"no PF data for graph {graph.name}")
    layers = config.layers if config is not None else BASE_LAYERS
    try:
        mu_src = pf.mu[layers.index(graph.source_layer)][graph.src_array]
        mu_dst = pf.mu[layers.index(graph.range_layer)][graph.dst_array]
    except ValueError:
        raise MissingPFDataError(f"graph {graph.name} runs between layers without PF data") from None
    if leg == "left":
        return mu_dst / mu_src
    if leg == "right":
        return mu_src / mu_dst
    raise ValueError(f"unknown leg: {leg}")


def field_to_two_tensor(f, pf, config=None, leg="left", weighting="mu"):
    """F[rho2, rho1] = mu(r(rho1)) / mu(s(rho1)) f[rho1, rho2] (reciprocal ratio on a right leg)"""
    ratio = _leg_ratio(f.graph, pf, config, leg, weighting)
    return TwoTensor.from_matrix(f.graph, (ratio[:, None] * f.coeffs).T)


def two_tensor_to_field(F, pf, config=None, leg="left", weighting="mu"):
    ratio = _leg_ratio(F.graph, pf, config, leg, weighting)
    return StringField.from_matrix(F.graph, F.values.T / ratio[:, None])


def _as_tensor(letter):
    return connection_to_tensor(letter) if isinstance(letter, Connection) else letter


def _check_legs(F, graph, side):
    if not F.graph.same_edges(graph):
        raise GraphMismatchError(f"2-tensor on {F.graph.name} does not fit the {side} leg ({graph.name})")


def _left(F, values):
    return np.einsum("kr,xres->xkes", F.values, values)


def _right(values, F):
    return np.einsum("xkeq,qs->xkes", values, F.values)


def check_half_zipper(F, Ftilde, a, tol=None):
    tol = DEFAULTS.tol if tol is None else tol
    _check_legs(F, a.config.g1, "left")
    _check_legs(Ftilde, a.config.g3, "right")
    defect = max_abs(_left(F, a.values) - _right(a.values, Ftilde))
    return defect < tol, defect


def half_zipper_candidate(F, a):
    """The only possible F-tilde, read off with the inverse blocks of the connection.

    Returns (candidate, defect of the half zipper with it).
    """
    cfg = a.config
    _check_legs(F, cfg.g1, "left")
    w = tensor_to_connection(a).values
    pushed = _left(F, w)
    per_xi = np.einsum("xkeq,xkes->xqs", w.conj(), pushed)
    valid = cfg.g0.dst_array[:, None] == cfg.g3.src_array[None, :]
    weights = valid / np.maximum(valid.sum(axis=0), 1)
    candidate = TwoTensor.from_matrix(cfg.g3, np.einsum("xq,xqs->qs", weights, per_xi))
    defect = max_abs(_left(F, a.values) - _right(a.values, candidate))
    return candidate, defect


def solve_half_zipper(F, a, tol=None):
    tol = DEFAULTS.tol if tol is None else tol
    candidate, defect = half_zipper_candidate(F, a)
    return candidate if defect < tol else None


def horizontal_product(a, b):
    """(a o b)[xi1, xi2, rho, eta1, eta2, sigma], summed over the shared vertical leg"""
    a, b = getattr(a, "values", a), getattr(b, "values", b)
    if a.shape[3] != b.shape[1]:
        raise GraphMismatchError(f"right leg of size {a.shape[3]} does not meet left leg of size {b.shape[1]}")
    return np.einsum("xrht,ytks->xyrhks", a, b)


def _word_tensor(tensors):
    """Contract a row of 4-tensors into one (top paths, left, bottom paths, right) array"""
    total = tensors[0].values
    for nxt in tensors[1:]:
        x, r, h, _ = total.shape
        y, _, k, s = nxt.values.shape
        total = horizontal_product(total, nxt).reshape(x * y, r, h * k, s)
    return total


def check_zipper(F, word, tol=None):
    """F on the left leg of the contracted word equals F on its right leg"""
    tol = DEFAULTS.tol if tol is None else tol
    if not isinstance(word, ConnectionWord):
        word = ConnectionWord(tuple(word))
    if not word.closed:
        raise OpenWordError("the zipper condition needs a closed word")
    _check_legs(F, word.left_graph, "left")
    tensors = [_as_tensor(letter) for letter in word.letters]
    total = _word_tensor(tensors)
    defect = max_abs(_left(F, total) - _right(total, F))
    return defect < tol, defect


def is_balanced(w, tol=None):
    """mu(x1) mu(x2) = mu(x0) mu(x3) on every nonzero cell"""
    tol = DEFAULTS.tol if tol is None else tol
    pf = w.pf
    if pf is None:
        raise MissingPFDataError(f"no PF data attached to {w.config.name}")
    cfg = w.config
    corners = (cfg.g0.src_array, cfg.g1.dst_array, cfg.g2.dst_array, cfg.g0.dst_array)
    mu0, mu1, mu2, mu3 = (pf.mu[p][c] for p, c in enumerate(corners))
    lhs = mu1[None, :, None, None] * mu2[None, None, :, None]
    rhs = (mu0 * mu3)[:, None, None, None]
    gap = np.where(np.abs(w.values) > tol, np.abs(lhs - rhs), 0.0)
    return max_abs(gap) < tol


def verify_theorem(f, word, tol=None, weighting="auto"):
    """Evaluate the four equivalent conditions for f on a closed word.

    weighting "auto" puts the mu ratio into the 2-tensors when every letter is balanced and
    uses unit ratios otherwise.
    """
    tol = DEFAULTS.tol if tol is None else tol
    if not isinstance(word, ConnectionWord):
        word = ConnectionWord(tuple(word))
    if not word.closed:
        raise OpenWordError("the theorem is stated for a closed word")
    first = word.letters[0]
    balanced = all(is_balanced(letter, tol) for letter in word.letters)
    if weighting == "auto":
        weighting = "mu" if balanced else "unit"

    F = field_to_two_tensor(f, first.require_pf(), first.config, "left", weighting)
    transport = transport_field(f, first, tol)
    candidate, half_zipper_defect = half_zipper_candidate(F, connection_to_tensor(first))
    zipper, zipper_defect = check_zipper(F, word, tol)
    flat, flat_defect = check_flatness(f, word, tol)

    half_zipper = half_zipper_defect < tol
    return TheoremReport(
        half_zipper=half_zipper,
        zipper=zipper,
        half_flat=transport.transportable,
        flat=flat,
        defects={
            "half_zipper": half_zipper_defect,
            "zipper": zipper_defect,
            "half_flat": transport.defect,
            "flat": flat_defect,
        },
        ftilde=transport.field,
        Ftilde=candidate if half_zipper else None,
        balanced=balanced,
        weighting=weighting,
    )


def random_field(graph, rng):
    matrix = rng.standard_normal((graph.num_edges,) * 2) + 1j * rng.standard_normal((graph.num_edges,) * 2)
    return StringField.from_matrix(graph, matrix)


class TheoremVerifier:
    """Runs the four-way check over flat fields, the identity and random fields of one word"""

    def __init__(self, word, tol=None, seed=None, weighting="auto"):
        self.word = word if isinstance(word, ConnectionWord) else ConnectionWord(tuple(word))
        self.tol = DEFAULTS.tol if tol is None else tol
        self.rng = np.random.default_rng(DEFAULTS.seed if seed is None else seed)
        self.weighting = weighting
        self._flat_basis = None

    @property
    def flat_basis(self):
        if self._flat_basis is None:
            self._flat_basis = solve_flat_fields(self.word, self.tol)
        return self._flat_basis

    def fields(self, samples):
        graph = self.word.left_graph
        named = [("identity", StringField.identity(graph))]
        named += [(f"flat[{k}]", f) for k, f in enumerate(self.flat_basis)]
        named += [(f"random[{k}]", random_field(graph, self.rng)) for k in range(samples)]
        return named

    def verify(self, f):
        return verify_theorem(f, self.word, self.tol, self.weighting)

    def run(self, samples=100, parallel=1):
        """Reports keyed by field name, in a fixed order whatever the worker count"""
        named = self.fields(samples)
        say(f"🔧 Checking {len(named)} fields ({len(self.flat_basis)} flat basis elements)")
        if parallel > 1:
            with ThreadPoolExecutor(max_workers=parallel) as pool:
                reports = list(progress(pool.map(self.verify, [f for _, f in named]), "fields", len(named)))
        else:
            reports = [self.verify(f) for _, f in progress(named, "fields")]
        results = dict(zip((name for name, _ in named), reports))

        disagreements = [name for name, report in results.items() if not report.agreement]
        if disagreements:
            warn(f"Verdicts disagree on {len(disagreements)} field(s): {', '.join(disagreements[:5])}")
        else:
            ok(f"All four conditions agree on {len(results)} fields")
        return results
