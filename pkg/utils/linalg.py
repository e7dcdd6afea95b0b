import numpy as np
from scipy.linalg import null_space

from models.errors import SystemSizeError


def unitarity_defect(matrix):
    """max |M*M - 1|, |MM* - 1|; infinite when M is not square"""
    rows, cols = matrix.shape
    if rows != cols:
        return float("inf")
    if rows == 0:
        return 0.0
    eye = np.eye(rows)
    return float(max(
        np.abs(matrix.conj().T @ matrix - eye).max(),
        np.abs(matrix @ matrix.conj().T - eye).max(),
    ))


def nullspace(system, tol, cap):
    """Orthonormal basis (columns) of the numerical kernel of `system`.

    Singular values below tol * largest count as zero. Columns are put in a canonical
    phase: the first entry of largest modulus is real and positive.
    """
    rows, cols = system.shape
    if rows * cols > cap * cap or cols > cap:
        raise SystemSizeError("linear system", rows * cols, cap * cap)
    if cols == 0:
        return np.zeros((0, 0), dtype=complex)
    if rows == 0 or not np.any(system):
        basis = np.eye(cols, dtype=complex)
    else:
        basis = null_space(system, rcond=tol)
    for k in range(basis.shape[1]):
        column = basis[:, k]
        pivot = int(np.argmax(np.abs(column) > np.abs(column).max() * (1 - 1e-9)))
        basis[:, k] = column * (abs(column[pivot]) / column[pivot])
    return basis


def max_abs(array):
    array = np.asarray(array)
    return float(np.abs(array).max()) if array.size else 0.0
