"""Vectorization helpers and the Jordan-block diagonal rescaler.

Column-stacking convention throughout: vec([[1, 2], [3, 4]]) = (1, 3, 2, 4),
and vec(A P B) = (B^T kron A) vec(P).
"""

import numpy as np

from .errors import DimensionMismatch, NonJordanInput

__all__ = ["vec", "unvec", "kron", "jordan_rescale"]


def vec(mat):
    """Column-stack a p x q matrix into a vector of length p*q."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2:
        raise DimensionMismatch("vec expects a 2-d array")
    return mat.flatten(order="F")


def unvec(v, p, q):
    """Inverse of vec: reshape a length-p*q vector into a p x q matrix."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size != p * q:
        raise DimensionMismatch(f"unvec expects a vector of length {p * q}")
    return v.reshape((p, q), order="F")


def kron(a, b):
    """Kronecker product of two matrices (thin shape-checked wrapper)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionMismatch("kron expects 2-d arrays")
    return np.kron(a, b)


def jordan_rescale(block, c):
    """Shrink the nilpotent part of a real Jordan block by a diagonal similarity.

    `block` must be a real Jordan form with constant diagonal real part
    r: either a scalar chain (r on the diagonal, 0/1 on the superdiagonal)
    or a complex-pair chain (2x2 rotation blocks [[r, xi], [-xi, r]] on the
    diagonal, 0/I superblocks).  Returns (d, P) where d is the diagonal of
    the similarity D and P = D block D^{-1} has every superdiagonal entry
    scaled to c, so the symmetric part of P satisfies

        lambda_min(sym P) >= r - c.

    Parameters
    ----------
    block : (s, s) array
        Real Jordan block (single eigenvalue real part).
    c : float
        Target superdiagonal size, c > 0.

    Returns
    -------
    d : (s,) array
        Diagonal entries of the scaling matrix.
    P : (s, s) array
        The rescaled block.
    """
    J = np.asarray(block, dtype=float)
    c = float(c)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise DimensionMismatch("jordan_rescale expects a square matrix")
    if c <= 0.0:
        raise NonJordanInput("rescale target c must be positive")
    s = J.shape[0]
    scale = max(1.0, float(np.max(np.abs(J))))
    tol = 1e-12 * scale

    r = J[0, 0]
    pair = s >= 2 and abs(J[1, 0]) > tol  # complex-pair real form
    b = 2 if pair else 1
    if s % b != 0:
        raise NonJordanInput("odd size for a complex-pair Jordan block")
    nblocks = s // b

    # validate the expected sparsity pattern
    expected = np.zeros_like(J)
    for i in range(nblocks):
        o = b * i
        if pair:
            xi = J[o, o + 1]
            expected[o, o] = r
            expected[o + 1, o + 1] = r
            expected[o, o + 1] = xi
            expected[o + 1, o] = -xi
        else:
            expected[o, o] = r
    for i in range(nblocks - 1):
        o = b * i
        sup = J[o, o + b]
        if not (abs(sup) <= tol or abs(sup - 1.0) <= tol):
            raise NonJordanInput("superdiagonal entries must be 0 or 1")
        if pair:
            expected[o, o + 2] = sup
            expected[o + 1, o + 3] = sup
        else:
            expected[o, o + 1] = sup
    if not np.allclose(J, expected, atol=tol, rtol=0.0):
        raise NonJordanInput("matrix is not in real Jordan form")
    for i in range(nblocks):
        if pair and abs(J[b * i, b * i] - r) > tol:
            raise NonJordanInput("diagonal real part is not constant")

    # geometric chain per sub-block makes each unit superdiagonal entry
    # equal to c after D J D^{-1}; the exponent only advances across unit
    # entries so disjoint chains do not accumulate conditioning
    expo = np.zeros(nblocks)
    for i in range(nblocks - 1):
        step = 1.0 if abs(J[b * i, b * i + b] - 1.0) <= tol else 0.0
        expo[i + 1] = expo[i] + step
    d = np.repeat(c ** -expo, b)
    P = (d[:, None] * J) / d[None, :]
    return d, P
