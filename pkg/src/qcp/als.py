"""Alternating least squares fitting of canonical models to full vectors.

Each sweep updates the modes in order 1..L.  For mode i the Gram matrix of
the Khatri-Rao chain of the other L-1 factors is formed once (a Hadamard
product of per-mode Gram matrices) and the two r x r normal systems that
share it are solved against the fast chain-times-slice products, one
right-hand side per digit of mode i.  The arithmetic per sweep is
dominated by the 2L slice products, i.e. O(2**(L-1)) with a constant
linear in the rank.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.lapack import dpotrf, dpotrs

from .cpmodel import CpModel, error_metrics
from .multilinear import FlopCounter, gram_chain, mttkrp_chain
from .quantize import mode_slice

#: Environment variable selecting the thread count for concurrent restarts.
THREADS_ENV = "QCP_THREADS"


class SpdSolveError(RuntimeError):
    """Raised when a normal-equation solve stays unstable at the
    regularization cap."""


@dataclass(frozen=True)
class RegularizationPolicy:
    """Trace-relative Tikhonov schedule for `solve_spd`.

    A failed (or badly pivoted) factorization is retried with
    G + mu * (trace(G)/r) * I, with mu escalating from ``base`` by factors
    of ``growth`` up to ``cap``.  ``base = 0`` disables retries.
    """

    base: float = 1e-12
    cap: float = 1e-6
    growth: float = 10.0


@dataclass
class AlsConfig:
    """Settings shared by the full-data and sparse fitters.

    ``tolerance`` bounds the maximum absolute entrywise factor change of a
    sweep; ``regularization`` is the base Tikhonov level (dimensionless,
    scaled by trace(G)/r inside the solver).  ``normalized`` selects the
    reduced format that pins row 1 of modes 1..L-1 to ones.
    """

    rank: int
    tolerance: float = 1e-8
    max_iterations: int = 1000
    restarts: int = 5
    seed: int = 0
    regularization: float = 1e-12
    normalized: bool = False
    balance_columns: bool = False

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.regularization < 0:
            raise ValueError("regularization must be nonnegative")
        if self.normalized and self.balance_columns:
            raise ValueError("column balancing applies to the free format only")


@dataclass
class AlsReport:
    """Bookkeeping for one fit (the winning restart when restarts > 1)."""

    iterations: int
    final_factor_change: float
    final_max_error: float
    objective_trace: list
    condition_warnings: int
    warnings_trace: list = field(default_factory=list)
    converged: bool = False
    solver_failed: bool = False
    multiply_adds: int = 0
    seed: int = 0


def thread_count():
    """Worker count for concurrent restarts (from QCP_THREADS, default 1)."""
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


def random_init(order, rank, seed, normalized=False):
    """Model with entries drawn i.i.d. uniform on the open interval (0, 1).

    Deterministic for a given seed.  In normalized mode, row 1 of modes
    1..L-1 is pinned to ones after drawing (the draw itself is unchanged,
    so the free entries match the free-format draw for the same seed).
    """
    rng = np.random.default_rng(seed)
    factors = []
    for _ in range(order):
        # integer lattice scaled into (0, 1), endpoints excluded
        factors.append(rng.integers(1, 1 << 53, size=(2, rank)) / float(1 << 53))
    if normalized:
        for A in factors[:-1]:
            A[0, :] = 1.0
    return CpModel(tuple(factors), normalized=normalized)


def solve_spd(G, rhs, policy=None):
    """Solve G x = rhs for symmetric positive (semi)definite G.

    Uses a Cholesky factorization.  If the factorization fails, or its
    smallest pivot squared falls below base * trace(G)/r, the solve is
    retried on G + mu * (trace(G)/r) * I with mu escalating per ``policy``.
    ``rhs`` may be a vector or a matrix of stacked right-hand sides.

    Returns (x, escalations) where ``escalations`` counts the retries that
    were needed; raises `SpdSolveError` once the schedule is exhausted.
    """
    if policy is None:
        policy = RegularizationPolicy()
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"G must be square, got shape {G.shape}")
    scale = float(np.abs(G).max())
    if float(np.abs(G - G.T).max()) > 1e-12 * max(scale, 1e-300):
        raise ValueError("G is not symmetric to within 1e-12 relative")
    rhs = np.asarray(rhs, dtype=float)
    stacked = rhs.ndim == 2
    b = rhs if stacked else rhs[:, None]
    r = G.shape[0]
    shift = float(np.trace(G)) / r
    pivot_floor = policy.base * shift

    mus = [0.0]
    if policy.base > 0:
        mu = policy.base
        while mu <= policy.cap * (1 + 1e-12):
            mus.append(mu)
            mu *= policy.growth

    for escalations, mu in enumerate(mus):
        Gmu = G if mu == 0.0 else G + (mu * shift) * np.eye(r)
        chol, info = dpotrf(Gmu, lower=1)
        if info != 0:
            continue
        if float(np.diag(chol).min()) ** 2 < pivot_floor:
            continue
        x, info = dpotrs(chol, b, lower=1)
        if info != 0:
            continue
        return (x if stacked else x[:, 0]), escalations
    raise SpdSolveError(
        f"SPD solve failed after {len(mus) - 1} regularization escalations"
    )


def _balance_columns(factors):
    """Rescale each rank-1 term so modes 1..L-1 have unit max-norm columns,
    pushing the accumulated scale into the last mode.  The represented
    tensor is unchanged."""
    carry = np.ones(factors[0].shape[1])
    for A in factors[:-1]:
        s = np.abs(A).max(axis=0)
        s = np.where(s > 0.0, s, 1.0)
        A /= s
        carry *= s
    factors[-1] *= carry


def _zero_model(order, rank, normalized):
    zero = np.zeros((2, rank))
    if normalized:
        pinned = np.vstack((np.ones(rank), np.zeros(rank)))
        factors = tuple([pinned] * (order - 1) + [zero])
    else:
        factors = tuple([zero] * order)
    return CpModel(factors, normalized=normalized)


def _fit_full_single(data, cfg, seed):
    """One ALS run from the random initialization drawn with ``seed``."""
    L = data.order
    r = cfg.rank
    values = data.values
    policy = RegularizationPolicy(base=cfg.regularization)
    counter = FlopCounter()
    factors = [np.array(A) for A in random_init(L, r, seed, cfg.normalized).factors]

    objective_trace = []
    warnings_trace = []
    total_warnings = 0
    best = None  # (objective, factor snapshot, max error)
    converged = False
    failed = False
    change = 0.0
    worst = np.inf
    sweeps = 0

    for _ in range(cfg.max_iterations):
        previous = [A.copy() for A in factors]
        warnings_before = total_warnings
        try:
            for i in range(1, L + 1):
                chain = [factors[m] for m in range(L - 1, -1, -1) if m != i - 1]
                slice2 = mode_slice(data, i, 2)
                if chain:
                    G = gram_chain(chain)
                    b2 = mttkrp_chain(chain, slice2, counter)
                else:
                    # order-1 data: the design matrix is a single row of ones
                    G = np.ones((r, r))
                    b2 = np.full(r, slice2[0])
                if cfg.normalized and i < L:
                    row2, used = solve_spd(G, b2, policy)
                    total_warnings += used
                    factors[i - 1] = np.vstack((np.ones(r), row2))
                else:
                    slice1 = mode_slice(data, i, 1)
                    if chain:
                        b1 = mttkrp_chain(chain, slice1, counter)
                    else:
                        b1 = np.full(r, slice1[0])
                    sol, used = solve_spd(G, np.column_stack((b1, b2)), policy)
                    total_warnings += used
                    factors[i - 1] = np.ascontiguousarray(sol.T)
        except SpdSolveError:
            failed = True
        if cfg.balance_columns and not failed:
            _balance_columns(factors)
        sweeps += 1
        worst, frob = error_metrics(factors, values)
        objective = 0.5 * frob * frob
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


def _better(candidate, incumbent):
    """Restart selection: finite errors beat non-finite, then strictly
    smaller error wins; ties keep the earlier seed."""
    c, b = candidate.final_max_error, incumbent.final_max_error
    if np.isfinite(c) and not np.isfinite(b):
        return True
    return np.isfinite(c) and c < b


def run_restarts(worker, seeds):
    """Run one fit per seed, threaded when QCP_THREADS > 1, and return the
    (model, report) pairs in seed order."""
    workers = thread_count()
    if workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, seeds))
    return [worker(s) for s in seeds]


def als_fit(data, cfg):
    """Fit a rank-r model to a full data vector by alternating least squares.

    Parameters
    ----------
    data : QuantizedVector
    cfg : AlsConfig

    Returns
    -------
    (CpModel, AlsReport)
        The best model over cfg.restarts independent random starts with
        seeds cfg.seed, cfg.seed + 1, ... (smallest maximum reconstruction
        error; ties keep the earliest seed) and that run's report.

    A run stops once the largest entrywise factor change of a sweep drops
    below cfg.tolerance or after cfg.max_iterations sweeps.  If a solve
    fails even at the regularization cap the run returns its best iterate
    with ``solver_failed`` set instead of raising.  Constant-zero data
    short-circuits to the zero model.
    """
    if not np.any(data.values):
        model = _zero_model(data.order, cfg.rank, cfg.normalized)
        report = AlsReport(
            iterations=0,
            final_factor_change=0.0,
            final_max_error=0.0,
            objective_trace=[],
            condition_warnings=0,
            converged=True,
            seed=cfg.seed,
        )
        return model, report

    seeds = [cfg.seed + t for t in range(cfg.restarts)]
    results = run_restarts(lambda s: _fit_full_single(data, cfg, s), seeds)
    model, report = results[0]
    for cand_model, cand_report in results[1:]:
        if _better(cand_report, report):
            model, report = cand_model, cand_report
    return model, report
