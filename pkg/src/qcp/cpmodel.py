"""Rank-r canonical models of dyadically folded vectors.

A model holds one 2 x r factor matrix per binary mode; the folded tensor
entry at multi-index (j_1, ..., j_L) is sum_k prod_v A_v[j_v, k].  A
vector of length 2**L is thus carried by 2*L*r parameters.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .quantize import QuantizedVector

# Error scans stream the reconstruction in blocks of this many bits so the
# peak footprint stays bounded for large orders.
_BLOCK_BITS = 14


@dataclass(frozen=True)
class CpModel:
    """Ordered factor matrices of a rank-r canonical model.

    Parameters
    ----------
    factors : sequence of L arrays, each 2 x r, mode 1 first.
    normalized : if True, row 1 of every factor except the last is pinned
        to ones (the reduced storage format with roughly half the free
        parameters).

    Factors are copied and frozen on construction; models are immutable.
    """

    factors: tuple
    normalized: bool = False

    def __post_init__(self):
        mats = []
        for m, A in enumerate(self.factors):
            A = np.array(A, dtype=float)
            if A.ndim != 2 or A.shape[0] != 2:
                raise ValueError(
                    f"factor {m + 1} must be a 2 x r matrix, got shape {A.shape}"
                )
            if not np.all(np.isfinite(A)):
                raise ValueError(f"factor {m + 1} has non-finite entries")
            A.setflags(write=False)
            mats.append(A)
        if not mats:
            raise ValueError("a model needs at least one factor")
        r = mats[0].shape[1]
        if r < 1 or any(A.shape[1] != r for A in mats):
            raise ValueError("factors must share a common positive column count")
        if self.normalized:
            for m, A in enumerate(mats[:-1]):
                if not np.all(A[0] == 1.0):
                    raise ValueError(
                        f"normalized model requires row 1 of mode {m + 1} to be ones"
                    )
        object.__setattr__(self, "factors", tuple(mats))

    @property
    def order(self):
        return len(self.factors)

    @property
    def rank(self):
        return self.factors[0].shape[1]


def eval_entry(model, idx):
    """Model value at one multi-index (digits in {1, 2}).  Cost O(L*r)."""
    if len(idx) != model.order:
        raise ValueError(
            f"multi-index length {len(idx)} does not match order {model.order}"
        )
    p = np.ones(model.rank)
    for v, (A, d) in enumerate(zip(model.factors, idx)):
        if d not in (1, 2):
            raise ValueError(f"digit {d} at mode {v + 1} outside {{1, 2}}")
        p = A[d - 1] * p
    return float(p.sum())


def reconstruct(model):
    """Expand the model to the full length-2**L vector in linear order.

    Entry i equals eval_entry(model, linear_to_multi(i, L)); the expansion
    appends one mode at a time so both paths multiply in the same order.
    """
    r = model.rank
    table = np.ones((1, r))
    for A in model.factors:
        table = (A[:, None, :] * table[None, :, :]).reshape(-1, r)
    return QuantizedVector(table.sum(axis=1), model.order)


def error_metrics(factors, values):
    """Max-norm and Frobenius deviation of a factor list from ``values``.

    Returns (max_abs, frobenius).  Up to order 20 the reconstruction is
    expanded directly; beyond that it is streamed in blocks of 2**14
    entries so the peak footprint stays bounded.
    """
    mats = list(factors)
    L = len(mats)
    r = mats[0].shape[1]
    values = np.asarray(values, dtype=float).ravel()
    if values.size != 1 << L:
        raise ValueError(
            f"expected 2**{L} = {1 << L} values, got {values.size}"
        )
    if L <= 20:
        table = np.ones((1, r))
        for A in mats:
            table = (A[:, None, :] * table[None, :, :]).reshape(-1, r)
        d = table.sum(axis=1) - values
        return float(np.abs(d).max()), float(np.linalg.norm(d))
    bits = _BLOCK_BITS
    table = np.ones((1, r))
    for A in mats[:bits]:
        table = (A[:, None, :] * table[None, :, :]).reshape(-1, r)
    block = 1 << bits
    worst = 0.0
    sumsq = 0.0
    for t in range(1 << (L - bits)):
        coef = np.ones(r)
        for m in range(bits, L):
            coef = mats[m][(t >> (m - bits)) & 1] * coef
        d = table @ coef - values[t * block:(t + 1) * block]
        worst = max(worst, float(np.abs(d).max()))
        sumsq += float(d @ d)
    return worst, float(np.sqrt(sumsq))


def max_error(model, data):
    """Maximum absolute deviation between the model and a data vector."""
    if model.order != data.order:
        raise ValueError(
            f"model order {model.order} does not match data order {data.order}"
        )
    return error_metrics(model.factors, data.values)[0]


def exp_rank1_model(decay, a, b, order):
    """Closed-form rank-1 model of exp(-decay * (x - a)) on a dyadic grid.

    The grid has 2**order nodes x_k = a + k*h with h = (b - a)/(2**order - 1),
    both endpoints included.  Mode p holds the column (1, q**(2**(p-1)))
    with q = exp(-decay * h), which reproduces the samples exactly.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    if not b > a:
        raise ValueError("interval must satisfy b > a")
    h = (b - a) / ((1 << order) - 1)
    factors = tuple(
        np.array([[1.0], [np.exp(-decay * h * (1 << p))]]) for p in range(order)
    )
    return CpModel(factors)


def save_model(model, path):
    """Write a model as text: a header line 'L r', then for each mode two
    lines of r decimal entries (row 1 then row 2)."""
    lines = [f"{model.order} {model.rank}"]
    for A in model.factors:
        for row in A:
            lines.append(" ".join(format(v, ".17g") for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path):
    """Read a model written by `save_model`.

    The file format does not carry the normalized flag; loaded models are
    returned in the free format.
    """
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty model file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"{path}: malformed header {lines[0]!r}")
    order, rank = int(head[0]), int(head[1])
    if len(lines) != 1 + 2 * order:
        raise ValueError(
            f"{path}: expected {1 + 2 * order} lines, found {len(lines)}"
        )
    factors = []
    for m in range(order):
        rows = []
        for j in (0, 1):
            entries = [float(tok) for tok in lines[1 + 2 * m + j].split()]
            if len(entries) != rank:
                raise ValueError(
                    f"{path}: mode {m + 1} row {j + 1} has {len(entries)} entries, expected {rank}"
                )
            rows.append(entries)
        factors.append(np.array(rows))
    return CpModel(tuple(factors))


def model_to_dict(model):
    """JSON-ready dictionary form of a model."""
    return {
        "order": model.order,
        "rank": model.rank,
        "normalized": model.normalized,
        "factors": [A.tolist() for A in model.factors],
    }


def model_from_dict(d):
    """Inverse of `model_to_dict`."""
    return CpModel(
        tuple(np.array(A) for A in d["factors"]),
        normalized=bool(d.get("normalized", False)),
    )
