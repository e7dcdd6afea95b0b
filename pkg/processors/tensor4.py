import numpy as np

from models.connection import Connection
from models.errors import MissingPFDataError
from models.graph import FAIL, PASS, ValidationReport
from models.tensor import FourTensor
from processors.connection import REFLECTIONS, reflect_config
from utils.settings import DEFAULTS

# Offending index lists in reports are cut to this many entries
MAX_OFFENDING = 10


def fourth_root_factor(config, pf):
    """(mu(s(xi)) mu(r(eta)) / (mu(r(xi)) mu(s(eta))))^(1/4) over (xi, eta)"""
    if pf is None:
        raise MissingPFDataError(f"no PF data attached to {config.name}")
    g0, g2 = config.g0, config.g2
    top = pf.mu[0][g0.src_array] / pf.mu[3][g0.dst_array]
    bottom = pf.mu[2][g2.dst_array] / pf.mu[1][g2.src_array]
    return (top[:, None] * bottom[None, :]) ** 0.25


def connection_to_tensor(w):
    q = fourth_root_factor(w.config, w.require_pf())
    return FourTensor.from_array(w.config, w.pf, q[:, None, :, None] * w.values)


def tensor_to_connection(a):
    q = fourth_root_factor(a.config, a.pf)
    return Connection.from_array(a.config, a.pf, a.values / q[:, None, :, None])


def tensor_conjugate(a):
    """a-bar(eta, rho~, xi, sigma~) = conj a(xi, rho, eta, sigma), on the vertically flipped configuration"""
    if a.pf is None:
        raise MissingPFDataError(f"no PF data attached to {a.config.name}")
    cfg = reflect_config(a.config, "bar")
    return FourTensor.from_array(cfg, a.pf.permuted(REFLECTIONS["bar"]), a.values.conj().transpose(2, 1, 0, 3))


def _offending(defect, tol):
    idx = np.argwhere(defect >= tol)[:MAX_OFFENDING]
    return [tuple(int(k) for k in row) for row in idx]


def check_tensor_biunitarity(a, tol=None):
    """Both tensor identities with their square-root weights.

    identity_1 contracts the left and vertical legs of a against a-bar stacked below it;
    identity_2 contracts the vertical and right legs. For xi = xi' the weights reduce to
    q^-2 and q^2 with q the fourth-root factor.
    """
    tol = DEFAULTS.tol if tol is None else tol
    cfg = a.config
    q = fourth_root_factor(cfg, a.pf)
    g0, g1, g3 = cfg.g0, cfg.g1, cfg.g3
    values = a.values

    gram1 = np.einsum("xres,yret,xe,ye->xsyt", values.conj(), values, 1 / q, 1 / q)
    valid1 = (g0.dst_array[:, None] == g3.src_array[None, :]).astype(float)
    target1 = np.einsum("xy,st,xs->xsyt", np.eye(g0.num_edges), np.eye(g3.num_edges), valid1)
    defect1 = np.abs(gram1 - target1)

    gram2 = np.einsum("xres,yqes,xe,ye->xryq", values, values.conj(), q, q)
    valid2 = (g0.src_array[:, None] == g1.src_array[None, :]).astype(float)
    target2 = np.einsum("xy,rq,xr->xryq", np.eye(g0.num_edges), np.eye(g1.num_edges), valid2)
    defect2 = np.abs(gram2 - target2)

    report = ValidationReport()
    for name, defect in (("identity_1", defect1), ("identity_2", defect2)):
        worst = float(defect.max()) if defect.size else 0.0
        report.add(name, PASS if worst < tol else FAIL, defect=worst, offending=_offending(defect, tol))
    return report
