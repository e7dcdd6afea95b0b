from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class FourTensor:
    """The 4-tensor a(xi, rho, eta, sigma): legs top, left, bottom, right.

    Indexed by the same cells as a Connection; only the normalization differs.
    """
    config: object
    pf: object
    values: np.ndarray

    @classmethod
    def from_array(cls, config, pf, values):
        values = np.where(config.cell_mask, np.asarray(values, dtype=complex), 0.0)
        values.setflags(write=False)
        return cls(config=config, pf=pf, values=values)

    def value(self, xi, rho, eta, sigma):
        if not self.config.is_cell(xi, rho, eta, sigma):
            return 0j
        return complex(self.values[xi, rho, eta, sigma])
