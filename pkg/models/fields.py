from dataclasses import dataclass, field

import numpy as np

from models.errors import GraphMismatchError


def _same_graph(a, b):
    return a.same_edges(b) and a.source_layer == b.source_layer and a.range_layer == b.range_layer


def _masked(graph, matrix):
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (graph.num_edges, graph.num_edges):
        raise GraphMismatchError(
            f"coefficients of shape {matrix.shape} do not fit graph {graph.name} ({graph.num_edges} edges)"
        )
    return np.where(graph.parallel_mask(), matrix, 0.0)


@dataclass(frozen=True, eq=False)
class StringField:
    """Field of strings sum f[rho1, rho2] (rho1, rho2) over parallel vertical edges"""
    graph: object
    coeffs: np.ndarray

    @classmethod
    def from_matrix(cls, graph, matrix):
        return cls(graph=graph, coeffs=_masked(graph, matrix))

    @classmethod
    def identity(cls, graph):
        return cls(graph=graph, coeffs=np.eye(graph.num_edges, dtype=complex))

    @classmethod
    def zero(cls, graph):
        return cls(graph=graph, coeffs=np.zeros((graph.num_edges,) * 2, dtype=complex))

    @classmethod
    def from_vector(cls, graph, vector):
        coeffs = np.zeros((graph.num_edges,) * 2, dtype=complex)
        for (k1, k2), c in zip(graph.parallel_pairs(), vector):
            coeffs[k1, k2] = c
        return cls(graph=graph, coeffs=coeffs)

    def scaled(self, factor):
        return StringField(self.graph, self.coeffs * factor)

    def plus(self, other):
        self.require_same_graph(other)
        return StringField(self.graph, self.coeffs + other.coeffs)

    def adjoint(self):
        return StringField(self.graph, self.coeffs.conj().T)

    def inner(self, other):
        """Frobenius inner product, conjugate-linear in self"""
        return complex(np.vdot(self.coeffs, other.coeffs))

    def require_same_graph(self, other):
        if not _same_graph(self.graph, other.graph):
            raise GraphMismatchError(f"fields live on different graphs ({self.graph.name} vs {other.graph.name})")


@dataclass
class TransportResult:
    """Result of pushing a field through one connection"""
    values: np.ndarray  # (xi, xi', sigma1, sigma2)
    defect: float
    field: StringField = None
    # Mean of the diagonal over xi; equals field.coeffs when transportable
    estimate: np.ndarray = None

    @property
    def transportable(self):
        return self.field is not None


@dataclass(frozen=True)
class OpenString:
    """Basis vector of the open string bimodule.

    `top` holds g0 edge ids starting at star0, forward at even steps and reversed at odd ones;
    `bottom` the same for g2 from star1. `vertical` is the terminal edge, in g1 when the level is
    even and in g3 when it is odd.
    """
    top: tuple
    bottom: tuple
    vertical: int

    @property
    def level(self):
        return len(self.top)

    def with_vertical(self, edge):
        return OpenString(self.top, self.bottom, edge)


@dataclass(frozen=True, eq=False)
class ConnectionWord:
    """Horizontally composable connections, left to right"""
    letters: tuple

    def __post_init__(self):
        letters = tuple(self.letters)
        object.__setattr__(self, "letters", letters)
        if not letters:
            raise GraphMismatchError("a connection word needs at least one letter")
        for k in range(len(letters) - 1):
            left, right = letters[k].config, letters[k + 1].config
            if not right.g1.same_edges(left.g3) or right.sizes[0] != left.sizes[3] or right.sizes[1] != left.sizes[2]:
                raise GraphMismatchError(f"letters {k} and {k + 1} are not horizontally composable")

    @property
    def left_graph(self):
        return self.letters[0].config.g1

    @property
    def right_graph(self):
        return self.letters[-1].config.g3

    @property
    def closed(self):
        first, last = self.letters[0].config, self.letters[-1].config
        return (
            self.right_graph.same_edges(self.left_graph)
            and first.sizes[0] == last.sizes[3]
            and first.sizes[1] == last.sizes[2]
        )

    def __len__(self):
        return len(self.letters)


@dataclass(frozen=True, eq=False)
class TwoTensor:
    """2-tensor F[rho2, rho1]: row = left leg, column = right leg"""
    graph: object
    values: np.ndarray

    @classmethod
    def from_matrix(cls, graph, matrix):
        return cls(graph=graph, values=_masked(graph, matrix))

    @classmethod
    def identity(cls, graph):
        return cls(graph=graph, values=np.eye(graph.num_edges, dtype=complex))


@dataclass
class TheoremReport:
    half_zipper: bool
    zipper: bool
    half_flat: bool
    flat: bool
    defects: dict = field(default_factory=dict)
    ftilde: StringField = None
    Ftilde: TwoTensor = None
    # mu(x1) mu(x2) == mu(x0) mu(x3) on every nonzero cell of every letter
    balanced: bool = True
    # "mu" when the 2-tensors carry the mu ratio, "unit" otherwise
    weighting: str = "mu"

    @property
    def verdicts(self):
        return {"half_zipper": self.half_zipper, "zipper": self.zipper, "half_flat": self.half_flat, "flat": self.flat}

    @property
    def agreement(self):
        return len(set(self.verdicts.values())) == 1

    @property
    def all_pass(self):
        return self.agreement and self.flat

    def to_dict(self):
        return {
            "verdicts": self.verdicts,
            "defects": {k: float(v) for k, v in sorted(self.defects.items())},
            "agreement": self.agreement,
            "balanced": self.balanced,
            "weighting": self.weighting,
        }
