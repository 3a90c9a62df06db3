"""Fitting canonical models from a small set of sampled entries.

Given M sampled entries of a length-2**L vector, each mode update solves
two independent least-squares systems: one over the samples whose digit in
that mode is 1 and one over those with digit 2 (unlike the full-data case,
the two systems have different matrices).  The design row of a sample is
the product of the current factor entries selected by its digits in all
other modes.  Running prefix products over already updated modes and
suffix products over pending modes give every mode's design rows in
O(M*r), so a full sweep costs O(M*L*r) multiply-adds plus the 2L small
solves.
"""

from dataclasses import dataclass

import numpy as np

from .als import (
    AlsReport,
    RegularizationPolicy,
    SpdSolveError,
    _better,
    random_init,
    run_restarts,
    solve_spd,
)
from .cpmodel import CpModel
from .multilinear import FlopCounter
from .quantize import multi_index_rows


@dataclass(frozen=True)
class SampleSet:
    """M sampled grid positions with their digit rows and values.

    ``indices`` are distinct 1-based linear indices into the length-2**order
    vector; ``digits`` is the (M, order) array of their binary multi-indices
    and must be consistent with ``indices`` under the index coding.
    """

    indices: np.ndarray
    digits: np.ndarray
    values: np.ndarray
    order: int

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64).ravel()
        if idx.size == 0:
            raise ValueError("a sample set needs at least one point")
        if np.unique(idx).size != idx.size:
            raise ValueError("sample indices must be distinct")
        digits = np.array(self.digits, dtype=np.int8)
        expected = multi_index_rows(idx, self.order)  # also range-checks
        if digits.shape != expected.shape or not np.array_equal(digits, expected):
            raise ValueError("digits are inconsistent with the linear indices")
        values = np.array(self.values, dtype=float).ravel()
        if values.size != idx.size:
            raise ValueError(
                f"got {values.size} values for {idx.size} sample points"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("sample values must be finite")
        for arr, name in ((idx, "indices"), (digits, "digits"), (values, "values")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_indices(cls, indices, order, values=None):
        """Build a sample set from linear indices; values default to zero
        so positions can be drawn before the function is evaluated."""
        idx = np.asarray(indices, dtype=np.int64).ravel()
        if values is None:
            values = np.zeros(idx.size)
        return cls(idx, multi_index_rows(idx, order), values, order)

    def with_values(self, values):
        """Same positions with new values."""
        return SampleSet(self.indices, self.digits, values, self.order)

    @property
    def size(self):
        return self.indices.size


@dataclass(frozen=True)
class ModePartition:
    """Sample positions (0-based within the set) split by one mode's digit."""

    rows_digit1: np.ndarray
    rows_digit2: np.ndarray


def partition_by_mode(samples, mode):
    """Partition of the sample positions by their digit in ``mode``."""
    if not 1 <= mode <= samples.order:
        raise ValueError(f"mode {mode} out of range [1, {samples.order}]")
    ones = samples.digits[:, mode - 1] == 1
    return ModePartition(np.flatnonzero(ones), np.flatnonzero(~ones))


def sample_points(strategy, count, order, seed):
    """Draw ``count`` distinct grid positions (values left at zero).

    ``uniform-random`` draws without replacement over the whole grid;
    ``stratified`` splits [1, 2**order] into ``count`` near-equal blocks
    and draws one position per block, guaranteeing coverage.
    """
    n = 1 << order
    if not 1 <= count <= n:
        raise ValueError(f"sample count {count} out of range [1, {n}]")
    rng = np.random.default_rng(seed)
    if strategy == "uniform-random":
        idx = rng.choice(n, size=count, replace=False).astype(np.int64) + 1
    elif strategy == "stratified":
        bounds = (np.arange(count + 1, dtype=np.int64) * n) // count
        idx = np.array(
            [rng.integers(bounds[t], bounds[t + 1]) for t in range(count)],
            dtype=np.int64,
        ) + 1
    else:
        raise ValueError(f"unknown sampling strategy {strategy!r}")
    return SampleSet.from_indices(idx, order)


def build_reduced_design(model, samples, mode):
    """Design matrices and right-hand sides of one mode's two systems.

    Row m, column k of a design matrix is the product over all modes
    except ``mode`` of the factor entries picked by sample m's digits.
    Returns (D1, D2, rhs1, rhs2) where D1/rhs1 cover the samples with
    digit 1 in ``mode`` and D2/rhs2 those with digit 2; empty partitions
    yield 0 x r matrices.
    """
    if model.order != samples.order:
        raise ValueError(
            f"model order {model.order} does not match sample order {samples.order}"
        )
    if not 1 <= mode <= model.order:
        raise ValueError(f"mode {mode} out of range [1, {model.order}]")
    rows = np.ones((samples.size, model.rank))
    picks = samples.digits.astype(np.intp) - 1
    for m, A in enumerate(model.factors):
        if m != mode - 1:
            rows = rows * A[picks[:, m]]
    part = partition_by_mode(samples, mode)
    return (
        rows[part.rows_digit1],
        rows[part.rows_digit2],
        samples.values[part.rows_digit1],
        samples.values[part.rows_digit2],
    )


def sampled_objective(model, samples):
    """Half the sum of squared residuals over the sampled entries."""
    if model.order != samples.order:
        raise ValueError(
            f"model order {model.order} does not match sample order {samples.order}"
        )
    picks = samples.digits.astype(np.intp) - 1
    rows = np.ones((samples.size, model.rank))
    for m, A in enumerate(model.factors):
        rows = rows * A[picks[:, m]]
    resid = samples.values - rows.sum(axis=1)
    return 0.5 * float(resid @ resid)


def _fit_sparse_single(samples, cfg, seed):
    """One sparse ALS run from the initialization drawn with ``seed``."""
    L = samples.order
    r = cfg.rank
    M = samples.size
    tau = samples.values
    picks = samples.digits.astype(np.intp) - 1
    masks = [picks[:, m] == 0 for m in range(L)]
    policy = RegularizationPolicy(base=cfg.regularization)
    counter = FlopCounter()
    factors = [np.array(A) for A in random_init(L, r, seed, cfg.normalized).factors]

    objective_trace = []
    warnings_trace = []
    total_warnings = 0
    best = None
    converged = False
    failed = False
    change = 0.0
    worst = np.inf
    sweeps = 0

    for _ in range(cfg.max_iterations):
        previous = [A.copy() for A in factors]
        warnings_before = total_warnings
        # suffix[m]: per-sample product over modes m+2..L (pre-sweep values)
        suffix = [None] * L
        running = np.ones((M, r))
        suffix[L - 1] = running
        for m in range(L - 1, 0, -1):
            running = running * factors[m][picks[:, m]]
            counter.add(M * r)
            suffix[m - 1] = running
        left = np.ones((M, r))
        try:
            for m in range(L):
                design = left * suffix[m]
                counter.add(M * r)
                new_rows = factors[m].copy()
                for j in (0, 1):
                    if cfg.normalized and j == 0 and m < L - 1:
                        continue
                    sel = masks[m] if j == 0 else ~masks[m]
                    nj = int(sel.sum())
                    if nj == 0:
                        # no sample constrains this row; keep it as is
                        total_warnings += 1
                        continue
                    if nj < r:
                        # rank-deficient system; the regularized solve decides
                        total_warnings += 1
                    D = design[sel]
                    G = D.T @ D
                    b = D.T @ tau[sel]
                    counter.add(2 * nj * r * r + 2 * nj * r)
                    sol, used = solve_spd(G, b, policy)
                    total_warnings += used
                    counter.add(r ** 3 + 2 * r * r)
                    new_rows[j] = sol
                factors[m] = new_rows
                left = left * factors[m][picks[:, m]]
                counter.add(M * r)
        except SpdSolveError:
            failed = True
        sweeps += 1
        if failed:
            # the prefix product is mid-sweep; recompute it for the metrics
            left = np.ones((M, r))
            for m in range(L):
                left = left * factors[m][picks[:, m]]
        resid = tau - left.sum(axis=1)
        counter.add(M * r + 3 * M)
        objective = 0.5 * float(resid @ resid)
        worst = float(np.abs(resid).max())
        objective_trace.append(objective)
        warnings_trace.append(total_warnings - warnings_before)
        if best is None or objective < best[0]:
            best = (objective, [A.copy() for A in factors], worst)
        change = max(float(np.abs(A - B).max()) for A, B in zip(factors, previous))
        if failed:
            break
        if change < cfg.tolerance:
            converged = True
            break

    if failed:
        _, factors, worst = best
    model = CpModel(tuple(factors), normalized=cfg.normalized)
    report = AlsReport(
        iterations=sweeps,
        final_factor_change=change,
        final_max_error=worst,
        objective_trace=objective_trace,
        condition_warnings=total_warnings,
        warnings_trace=warnings_trace,
        converged=converged,
        solver_failed=failed,
        multiply_adds=counter.count,
        seed=seed,
    )
    return model, report


def als_sparse_fit(samples, cfg):
    """Fit a rank-r model to the sampled entries by alternating least squares.

    Parameters
    ----------
    samples : SampleSet
        Positions, digit rows and values; the order comes from the set.
    cfg : AlsConfig

    Returns
    -------
    (CpModel, AlsReport)
        Best run over cfg.restarts random starts, judged by the maximum
        absolute residual over the sampled entries (the only error the
        sparse path can see); ties keep the earliest seed.  The report's
        objective trace holds the sampled half-sum-of-squares per sweep.

    Empty digit partitions skip that row's update and count a condition
    warning; partitions smaller than the rank also count one and proceed
    with the regularized solve.
    """
    seeds = [cfg.seed + t for t in range(cfg.restarts)]
    results = run_restarts(lambda s: _fit_sparse_single(samples, cfg, s), seeds)
    model, report = results[0]
    for cand_model, cand_report in results[1:]:
        if _better(cand_report, report):
            model, report = cand_model, cand_report
    return model, report
