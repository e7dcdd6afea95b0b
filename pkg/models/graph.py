from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from models.errors import ConfigStructureError

# Corner positions of the square: V0 top-left, V1 bottom-left, V2 bottom-right, V3 top-right.
# Each graph slot runs between two positions.
GRAPH_SLOTS = {
    "G0": (0, 3),
    "G1": (0, 1),
    "G2": (1, 2),
    "G3": (3, 2),
}
BASE_LAYERS = ("V0", "V1", "V2", "V3")


@dataclass(frozen=True)
class VertexId:
    layer: str
    index: int

    def __str__(self):
        return f"{self.layer}[{self.index}]"


@dataclass(frozen=True)
class BipartiteGraph:
    """Oriented bipartite multigraph; edge k runs src[k] -> dst[k]"""
    name: str
    source_layer: str
    range_layer: str
    src: tuple
    dst: tuple
    reversed: bool = False
    # Composite graphs remember the (upper, lower) edge pair behind each edge
    parts: tuple = None

    def __post_init__(self):
        if self.source_layer == self.range_layer:
            raise ConfigStructureError(f"graph {self.name} is a loop graph on {self.source_layer}")
        if len(self.src) != len(self.dst):
            raise ConfigStructureError(f"graph {self.name}: source/range lists differ in length")

    @property
    def num_edges(self):
        return len(self.src)

    @cached_property
    def src_array(self):
        return np.asarray(self.src, dtype=int)

    @cached_property
    def dst_array(self):
        return np.asarray(self.dst, dtype=int)

    def reverse(self):
        """Same edges, orientation flipped (the tilde of an edge)"""
        name = self.name[:-1] if self.name.endswith("~") else self.name + "~"
        return BipartiteGraph(
            name=name,
            source_layer=self.range_layer,
            range_layer=self.source_layer,
            src=self.dst,
            dst=self.src,
            reversed=not self.reversed,
            parts=self.parts,
        )

    def multiplicity(self, n_source, n_range):
        """Delta matrix: number of edges between each source and range vertex"""
        delta = np.zeros((n_source, n_range))
        np.add.at(delta, (self.src_array, self.dst_array), 1.0)
        return delta

    def same_edges(self, other):
        return self.src == other.src and self.dst == other.dst

    def parallel_pairs(self):
        """All (k1, k2) with equal source and equal range, in lexicographic order"""
        return [
            (k1, k2)
            for k1 in range(self.num_edges)
            for k2 in range(self.num_edges)
            if self.src[k1] == self.src[k2] and self.dst[k1] == self.dst[k2]
        ]

    def parallel_mask(self):
        return (self.src_array[:, None] == self.src_array[None, :]) & (
            self.dst_array[:, None] == self.dst_array[None, :]
        )


@dataclass(frozen=True)
class FourGraphConfig:
    """The square of four graphs: g0 on top, g1 left, g2 bottom, g3 right"""
    g0: BipartiteGraph
    g1: BipartiteGraph
    g2: BipartiteGraph
    g3: BipartiteGraph
    sizes: tuple
    layers: tuple = BASE_LAYERS
    # Optional display labels per position, e.g. the vertex numbers of a figure
    labels: tuple = field(default=None, compare=False)
    name: str = field(default="config", compare=False)

    @property
    def graphs(self):
        return (self.g0, self.g1, self.g2, self.g3)

    @property
    def edge_counts(self):
        return tuple(g.num_edges for g in self.graphs)

    def size_of(self, layer):
        return self.sizes[self.layers.index(layer)]

    def check_structure(self):
        """Raise ConfigStructureError when an edge points outside its layers"""
        if len(self.sizes) != 4 or len(self.layers) != 4:
            raise ConfigStructureError("a configuration needs exactly four layers")
        for slot, g in zip(GRAPH_SLOTS, self.graphs):
            p_src, p_dst = GRAPH_SLOTS[slot]
            if g.source_layer != self.layers[p_src] or g.range_layer != self.layers[p_dst]:
                raise ConfigStructureError(
                    f"{slot} ({g.name}) runs {g.source_layer}->{g.range_layer}, "
                    f"expected {self.layers[p_src]}->{self.layers[p_dst]}"
                )
            for k, (s, r) in enumerate(zip(g.src, g.dst)):
                if not (0 <= s < self.sizes[p_src]) or not (0 <= r < self.sizes[p_dst]):
                    raise ConfigStructureError(f"{slot} edge {k}: vertex id out of range ({s}->{r})")

    @cached_property
    def cell_mask(self):
        """Boolean array over (e0, e1, e2, e3): True exactly on cells"""
        g0, g1, g2, g3 = self.graphs
        s0, r0 = g0.src_array[:, None, None, None], g0.dst_array[:, None, None, None]
        s1, r1 = g1.src_array[None, :, None, None], g1.dst_array[None, :, None, None]
        s2, r2 = g2.src_array[None, None, :, None], g2.dst_array[None, None, :, None]
        s3, r3 = g3.src_array[None, None, None, :], g3.dst_array[None, None, None, :]
        return (s0 == s1) & (r0 == s3) & (r1 == s2) & (r2 == r3)

    def is_cell(self, e0, e1, e2, e3):
        return bool(self.cell_mask[e0, e1, e2, e3])

    def cell_corners(self, e0, e1, e2, e3):
        """(x0, x1, x2, x3) of a cell, by position"""
        return (self.g0.src[e0], self.g1.dst[e1], self.g2.dst[e2], self.g0.dst[e0])

    def label(self, position, index):
        if self.labels is None:
            return f"{self.layers[position]}[{index}]"
        return self.labels[position][index]


@dataclass(frozen=True, eq=False)
class PFData:
    """Perron-Frobenius weights: mu per position, beta0 horizontal, beta1 vertical"""
    mu: tuple
    beta0: float
    beta1: float
    tol: float = 1e-10

    def permuted(self, order):
        """Weights for a configuration whose position p holds the old position order[p]"""
        return PFData(mu=tuple(self.mu[p] for p in order), beta0=self.beta0, beta1=self.beta1, tol=self.tol)


PASS, FAIL, WARN = "pass", "fail", "warn"


@dataclass
class CheckResult:
    name: str
    status: str
    defect: float = 0.0
    offending: list = field(default_factory=list)

    def to_dict(self):
        return {
            "name": self.name,
            "status": self.status,
            "defect": float(self.defect),
            "offending": [list(map(int, o)) if isinstance(o, tuple) else o for o in self.offending],
        }


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    def add(self, name, status, defect=0.0, offending=None):
        self.checks.append(CheckResult(name, status, float(defect), list(offending or [])))
        return self

    @property
    def failures(self):
        return [c for c in self.checks if c.status == FAIL]

    @property
    def passed(self):
        return not self.failures

    @property
    def max_defect(self):
        return max((c.defect for c in self.checks), default=0.0)

    def status_of(self, name):
        for c in self.checks:
            if c.name == name:
                return c.status
        raise KeyError(name)

    def merged(self, other, prefix=""):
        report = ValidationReport(list(self.checks))
        for c in other.checks:
            report.checks.append(CheckResult(prefix + c.name, c.status, c.defect, list(c.offending)))
        return report

    def to_dict(self):
        return {
            "passed": self.passed,
            "max_defect": float(self.max_defect),
            "checks": [c.to_dict() for c in self.checks],
        }
