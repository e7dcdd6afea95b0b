from dataclasses import dataclass

import numpy as np

from models.errors import GaugeError, MissingPFDataError


@dataclass(frozen=True, eq=False)
class Connection:
    """Complex value per cell, stored densely over (e0, e1, e2, e3) and zero off cells"""
    config: object
    pf: object
    values: np.ndarray

    @classmethod
    def from_array(cls, config, pf, values):
        values = np.asarray(values, dtype=complex)
        expected = config.edge_counts
        if values.shape != expected:
            raise ValueError(f"value array has shape {values.shape}, config needs {expected}")
        values = np.where(config.cell_mask, values, 0.0)
        values.setflags(write=False)
        return cls(config=config, pf=pf, values=values)

    def value(self, e0, e1, e2, e3):
        if not self.config.is_cell(e0, e1, e2, e3):
            return 0j
        return complex(self.values[e0, e1, e2, e3])

    def cells(self):
        """Index tuples of every cell, lexicographic"""
        return [tuple(map(int, c)) for c in np.argwhere(self.config.cell_mask)]

    def require_pf(self):
        if self.pf is None:
            raise MissingPFDataError("this operation needs Perron-Frobenius data on the connection")
        return self.pf

    def block(self, x0, x2):
        """Unitarity block at (x0, x2): rows (xi1, xi2), columns (xi0, xi3)"""
        g0, g1, g2, g3 = self.config.graphs
        rows = [
            (e1, e2)
            for e1 in range(g1.num_edges) if g1.src[e1] == x0
            for e2 in range(g2.num_edges) if g2.src[e2] == g1.dst[e1] and g2.dst[e2] == x2
        ]
        cols = [
            (e0, e3)
            for e0 in range(g0.num_edges) if g0.src[e0] == x0
            for e3 in range(g3.num_edges) if g3.src[e3] == g0.dst[e0] and g3.dst[e3] == x2
        ]
        matrix = np.zeros((len(rows), len(cols)), dtype=complex)
        for i, (e1, e2) in enumerate(rows):
            for j, (e0, e3) in enumerate(cols):
                matrix[i, j] = self.values[e0, e1, e2, e3]
        return rows, cols, matrix


@dataclass(frozen=True, eq=False)
class GaugePair:
    """Block matrices u on E(g1) and v on E(g3); zero between non-parallel edges"""
    u: np.ndarray
    v: np.ndarray

    def check_support(self, config, tol=1e-12):
        for name, mat, g in (("u", self.u, config.g1), ("v", self.v, config.g3)):
            if mat.shape != (g.num_edges, g.num_edges):
                raise GaugeError(f"{name} has shape {mat.shape}, expected {(g.num_edges,) * 2}")
            leak = np.abs(np.where(g.parallel_mask(), 0.0, mat)).max(initial=0.0)
            if leak > tol:
                raise GaugeError(f"{name} couples non-parallel edges (entry {leak:.3e})")

    def unitarity_defect(self):
        defect = 0.0
        for mat in (self.u, self.v):
            eye = np.eye(mat.shape[0])
            defect = max(defect, np.abs(mat @ mat.conj().T - eye).max(initial=0.0))
        return float(defect)

    def compose(self, other):
        """Blockwise product: applying self then other equals applying the result"""
        return GaugePair(u=other.u @ self.u, v=self.v @ other.v)

    def adjoint(self):
        return GaugePair(u=self.u.conj().T, v=self.v.conj().T)

    @classmethod
    def identity(cls, config):
        return cls(u=np.eye(config.g1.num_edges, dtype=complex), v=np.eye(config.g3.num_edges, dtype=complex))
