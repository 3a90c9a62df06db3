"""Kronecker, Khatri-Rao and Hadamard primitives plus the fast sweep kernels.

Two products dominate an alternating least-squares sweep over a folded
vector: the r x r Gram matrix of a Khatri-Rao chain, and the chain
transpose applied to a data slice (the MTTKRP).  `gram_chain` forms the
Gram matrix as a Hadamard product of per-mode Gram matrices, and
`mttkrp_chain` applies the transposed chain by repeatedly contracting the
slowest-varying mode of a reshaped copy.  Neither ever materialises the
2**p x r chain matrix.

Ordering contract used throughout the package: factor lists are passed
highest mode first, and the vector argument of `mttkrp_chain` varies
fastest in the mode of the *last* factor of the list.
"""

import numpy as np


class FlopCounter:
    """Accumulates multiply-add counts for instrumented kernels."""

    __slots__ = ("count",)

    def __init__(self):
        self.count = 0

    def add(self, n):
        self.count += int(n)

    def reset(self):
        self.count = 0


def _check_factors(factors):
    if len(factors) == 0:
        raise ValueError("factor list must be nonempty")
    mats = [
        A if isinstance(A, np.ndarray) and A.dtype == np.float64
        else np.asarray(A, dtype=float)
        for A in factors
    ]
    r = mats[0].shape[1] if mats[0].ndim == 2 else -1
    for m, A in enumerate(mats):
        if A.ndim != 2:
            raise ValueError(f"factor {m} is not a matrix")
        if A.shape[1] != r:
            raise ValueError(
                f"factor {m} has {A.shape[1]} columns, expected {r}"
            )
    return mats, r


def kronecker(b, c):
    """Kronecker product of two vectors; entry (p-1)*len(c) + q is b_p c_q."""
    b = np.asarray(b, dtype=float).ravel()
    c = np.asarray(c, dtype=float).ravel()
    if b.size == 0 or c.size == 0:
        raise ValueError("kronecker factors must be nonempty")
    return np.outer(b, c).ravel()


def khatri_rao(B, C):
    """Columnwise Kronecker product of two matrices with equal column counts.

    Column k of the result is kronecker(B[:, k], C[:, k]); the row index of
    the first argument varies slowest.
    """
    (B, C), r = _check_factors([B, C])
    return (B[:, None, :] * C[None, :, :]).reshape(-1, r)


def hadamard(M, N):
    """Elementwise product of two equally shaped matrices."""
    M = np.asarray(M, dtype=float)
    N = np.asarray(N, dtype=float)
    if M.shape != N.shape:
        raise ValueError(f"shape mismatch {M.shape} vs {N.shape}")
    return M * N


def gram_chain(factors):
    """Gram matrix of the Khatri-Rao chain of ``factors``.

    Equals K.T @ K for K the explicit chain, but is computed as the
    Hadamard product of the per-factor Gram matrices A.T @ A, so the cost
    is O(len(factors) * n * r**2) instead of exponential in the chain
    length.  The result is symmetric positive semidefinite.
    """
    mats, r = _check_factors(factors)
    G = np.ones((r, r))
    for A in mats:
        G *= A.T @ A
    return G


def mttkrp_chain(factors, x, counter=None):
    """Transposed Khatri-Rao chain applied to a vector, without the chain.

    ``factors`` are 2 x r matrices listed highest mode first, and ``x`` has
    length 2**len(factors) with the last factor's mode varying fastest.
    Component k of the result is the inner product of ``x`` with the
    Kronecker chain of the k-th columns.  The evaluation contracts one mode
    at a time, slowest first, for 3*r*(2**p - 1) multiply-adds in total;
    pass a `FlopCounter` to record them.
    """
    mats, r = _check_factors(factors)
    for m, A in enumerate(mats):
        if A.shape[0] != 2:
            raise ValueError(f"factor {m} must have exactly 2 rows")
    x = np.asarray(x, dtype=float).ravel()
    p = len(mats)
    if x.size != 1 << p:
        raise ValueError(f"expected a vector of length 2**{p}, got {x.size}")
    # First contraction works on the raw vector, producing one running
    # vector per rank column; later contractions halve those in place.
    w = x.reshape(2, -1).T @ mats[0]
    if counter is not None:
        counter.add(3 * r * (x.size >> 1))
    buf = np.empty((w.shape[0] >> 1, r))
    for A in mats[1:]:
        half = w.shape[0] >> 1
        np.multiply(w[half:], A[1], out=buf[:half])
        w = w[:half]
        w *= A[0]
        w += buf[:half]
        if counter is not None:
            counter.add(3 * r * half)
    return w[0]
