"""Sparse interpolation: sample sets, reduced designs, sparse ALS."""

import numpy as np
import pytest

from qcp.als import AlsConfig, als_fit
from qcp.cpmodel import CpModel, exp_rank1_model, max_error, reconstruct
from qcp.quantize import QuantizedVector, multi_index_rows
from qcp.sparse import (
    ModePartition,
    SampleSet,
    als_sparse_fit,
    build_reduced_design,
    partition_by_mode,
    sample_points,
    sampled_objective,
)

from oracles import khatri_rao_chain


def full_sample_set(values, order):
    idx = np.arange(1, (1 << order) + 1)
    return SampleSet.from_indices(idx, order, values)


def random_model(order, rank, seed, offset=0.5):
    rng = np.random.default_rng(seed)
    return CpModel(tuple(rng.random((2, rank)) + offset for _ in range(order)))


class TestSampleSet:
    def test_from_indices_fills_digits(self):
        s = SampleSet.from_indices(np.array([1, 6, 16]), 4)
        assert np.array_equal(s.digits, multi_index_rows(np.array([1, 6, 16]), 4))
        assert np.array_equal(s.values, np.zeros(3))

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            SampleSet.from_indices(np.array([3, 3]), 4)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            SampleSet.from_indices(np.array([0]), 4)
        with pytest.raises(ValueError):
            SampleSet.from_indices(np.array([17]), 4)

    def test_inconsistent_digits_rejected(self):
        idx = np.array([1, 2])
        digits = multi_index_rows(idx, 3).copy()
        digits[0, 0] = 2
        with pytest.raises(ValueError):
            SampleSet(idx, digits, np.zeros(2), 3)

    def test_with_values_checks_length(self):
        s = SampleSet.from_indices(np.array([1, 2, 3]), 4)
        with pytest.raises(ValueError):
            s.with_values(np.zeros(2))
        s2 = s.with_values(np.array([1.0, 2.0, 3.0]))
        assert np.array_equal(s2.values, [1, 2, 3])

    def test_non_finite_values_rejected(self):
        with pytest.raises(ValueError):
            SampleSet.from_indices(np.array([1]), 3, np.array([np.inf]))


class TestSamplePoints:
    def test_exhaustive_draw_covers_grid(self):
        for strategy in ("uniform-random", "stratified"):
            s = sample_points(strategy, 16, 4, seed=0)
            assert sorted(s.indices.tolist()) == list(range(1, 17))

    def test_same_seed_same_set(self):
        a = sample_points("uniform-random", 10, 6, seed=5)
        b = sample_points("uniform-random", 10, 6, seed=5)
        assert np.array_equal(a.indices, b.indices)

    def test_stratified_block_membership(self):
        s = sample_points("stratified", 4, 4, seed=1)
        blocks = [(1, 4), (5, 8), (9, 12), (13, 16)]
        for idx, (lo, hi) in zip(s.indices, blocks):
            assert lo <= idx <= hi

    def test_too_many_points_raises(self):
        with pytest.raises(ValueError):
            sample_points("uniform-random", 17, 4, seed=0)

    def test_unknown_strategy_raises(self):
        with pytest.raises(ValueError):
            sample_points("sobol", 4, 4, seed=0)


class TestPartition:
    def test_partition_is_disjoint_and_complete(self):
        s = sample_points("uniform-random", 20, 6, seed=2)
        for mode in range(1, 7):
            part = partition_by_mode(s, mode)
            assert isinstance(part, ModePartition)
            merged = np.concatenate((part.rows_digit1, part.rows_digit2))
            assert sorted(merged.tolist()) == list(range(20))
            assert np.all(s.digits[part.rows_digit1, mode - 1] == 1)
            assert np.all(s.digits[part.rows_digit2, mode - 1] == 2)


class TestBuildReducedDesign:
    def test_full_sampling_matches_khatri_rao_rows(self):
        order, rank = 5, 3
        model = random_model(order, rank, seed=3)
        rng = np.random.default_rng(4)
        samples = full_sample_set(rng.standard_normal(1 << order), order)
        for mode in range(1, order + 1):
            D1, D2, r1, r2 = build_reduced_design(model, samples, mode)
            chain = khatri_rao_chain(
                [model.factors[m] for m in range(order - 1, -1, -1) if m != mode - 1]
            )
            assert np.abs(D1 - chain).max() <= 1e-13 * np.abs(chain).max()
            assert np.abs(D2 - chain).max() <= 1e-13 * np.abs(chain).max()
            assert r1.size == r2.size == 1 << (order - 1)

    def test_all_ones_model_gives_unit_design(self):
        order = 4
        model = CpModel(tuple(np.ones((2, 1)) for _ in range(order)))
        samples = SampleSet.from_indices(np.array([1, 5, 12]), order)
        D1, D2, _, _ = build_reduced_design(model, samples, 2)
        assert np.all(D1 == 1.0) and np.all(D2 == 1.0)

    def test_single_sample_partition_shapes(self):
        order = 4
        model = random_model(order, 2, seed=5)
        samples = SampleSet.from_indices(np.array([1]), order)  # digit 1 everywhere
        D1, D2, r1, r2 = build_reduced_design(model, samples, 3)
        assert D1.shape == (1, 2) and D2.shape == (0, 2)
        assert r1.size == 1 and r2.size == 0

    def test_row_products_skip_target_mode(self):
        order = 4
        model = random_model(order, 2, seed=6)
        samples = SampleSet.from_indices(np.array([7]), order, np.array([1.5]))
        digits = samples.digits[0]
        mode = 2
        D1, D2, _, _ = build_reduced_design(model, samples, mode)
        target = D1 if digits[mode - 1] == 1 else D2
        for k in range(2):
            expected = 1.0
            for m in range(order):
                if m != mode - 1:
                    expected *= model.factors[m][digits[m] - 1, k]
            assert target[0, k] == pytest.approx(expected, rel=1e-15)


class TestSampledObjective:
    def test_exact_model_is_zero(self):
        model = exp_rank1_model(1.0, 0.0, 1.0, 6)
        values = reconstruct(model).values
        samples = full_sample_set(values, 6)
        assert sampled_objective(model, samples) <= 1e-20

    def test_single_offset_sample(self):
        order = 3
        model = CpModel(tuple(np.zeros((2, 1)) for _ in range(order)))
        samples = SampleSet.from_indices(np.array([4]), order, np.array([2.0]))
        assert sampled_objective(model, samples) == 2.0

    def test_matches_loop_evaluation(self):
        from qcp.cpmodel import eval_entry

        model = random_model(5, 2, seed=7)
        s = sample_points("uniform-random", 12, 5, seed=8)
        rng = np.random.default_rng(9)
        s = s.with_values(rng.standard_normal(12))
        total = 0.0
        for m in range(s.size):
            resid = s.values[m] - eval_entry(model, tuple(s.digits[m]))
            total += 0.5 * resid * resid
        assert sampled_objective(model, s) == pytest.approx(total, rel=1e-12)


class TestAlsSparseFit:
    def test_full_sampling_recovers_exponential(self):
        order = 8
        h = 1.0 / (2 ** order - 1)
        values = np.exp(-h * np.arange(2 ** order))
        samples = full_sample_set(values, order)
        cfg = AlsConfig(rank=1, restarts=1, max_iterations=200)
        model, report = als_sparse_fit(samples, cfg)
        assert report.objective_trace[-1] <= 1e-18
        assert max_error(model, QuantizedVector(values, order)) <= 1e-9

    def test_one_sweep_matches_full_data_path(self):
        order, rank, seed = 6, 2, 13
        rng = np.random.default_rng(10)
        values = rng.random(1 << order) + 0.5
        data = QuantizedVector(values, order)
        samples = full_sample_set(values, order)
        cfg = AlsConfig(rank=rank, restarts=1, seed=seed, max_iterations=1,
                        tolerance=1e-300)
        dense_model, _ = als_fit(data, cfg)
        sparse_model, _ = als_sparse_fit(samples, cfg)
        for A, B in zip(dense_model.factors, sparse_model.factors):
            assert np.abs(A - B).max() <= 1e-10 * max(1.0, np.abs(A).max())

    def test_one_sweep_matches_design_matrix_updates(self):
        # the running prefix/suffix products must reproduce the per-mode
        # design matrices exactly, sequential updates included
        from qcp.als import random_init, solve_spd

        order, rank, seed = 6, 2, 3
        rng = np.random.default_rng(20)
        idx = rng.choice(64, size=30, replace=False) + 1
        samples = SampleSet.from_indices(idx, order, rng.random(30) + 0.5)
        cfg = AlsConfig(rank=rank, restarts=1, seed=seed, max_iterations=1,
                        tolerance=1e-300)
        model, _ = als_sparse_fit(samples, cfg)

        factors = [np.array(A) for A in random_init(order, rank, seed).factors]
        for mode in range(1, order + 1):
            D1, D2, r1, r2 = build_reduced_design(
                CpModel(tuple(factors)), samples, mode)
            new = factors[mode - 1].copy()
            for j, (D, y) in enumerate(((D1, r1), (D2, r2))):
                if D.shape[0]:
                    new[j] = solve_spd(D.T @ D, D.T @ y)[0]
            factors[mode - 1] = new
        for A, B in zip(model.factors, factors):
            assert np.abs(A - B).max() <= 1e-10 * max(1.0, np.abs(A).max())

    def test_sampled_objective_monotone_without_escalations(self):
        order = 8
        h = 1.0 / (2 ** order - 1)
        x = h * np.arange(2 ** order)
        spec_values = np.exp(-x * x * 4.0)
        rng = np.random.default_rng(11)
        idx = rng.choice(1 << order, size=64, replace=False) + 1
        samples = SampleSet.from_indices(idx, order, spec_values[idx - 1])
        _, report = als_sparse_fit(
            samples, AlsConfig(rank=2, restarts=1, seed=1, max_iterations=60))
        trace = report.objective_trace
        for t in range(1, len(trace)):
            if report.warnings_trace[t] == 0:
                assert trace[t] <= trace[t - 1] * (1 + 1e-10) + 1e-30

    def test_empty_partition_keeps_row_and_warns(self):
        order = 4
        # every index has digit 1 in mode 3 (bit 2 unset)
        idx = np.array([1, 2, 3, 4, 9, 10, 11, 12])
        assert np.all(multi_index_rows(idx, order)[:, 2] == 1)
        rng = np.random.default_rng(12)
        samples = SampleSet.from_indices(idx, order, rng.random(idx.size) + 1.0)
        seed = 2
        cfg = AlsConfig(rank=1, restarts=1, seed=seed, max_iterations=5,
                        tolerance=1e-300)
        from qcp.als import random_init

        start = random_init(order, 1, seed)
        model, report = als_sparse_fit(samples, cfg)
        assert report.condition_warnings >= 5
        assert model.factors[2][1, 0] == start.factors[2][1, 0]

    def test_interpolation_residual_bound(self):
        order = 6
        model0 = random_model(order, 2, seed=14)
        values = reconstruct(model0).values
        rng = np.random.default_rng(15)
        idx = rng.choice(1 << order, size=48, replace=False) + 1
        samples = SampleSet.from_indices(idx, order, values[idx - 1])
        model, report = als_sparse_fit(
            samples, AlsConfig(rank=2, restarts=3, max_iterations=400))
        delta = report.objective_trace[-1]
        assert report.final_max_error <= np.sqrt(2 * delta) + 1e-15

    def test_flop_count_linear_in_sample_count(self):
        order, rank = 10, 3
        h = 1.0 / (2 ** order - 1)
        values = np.exp(-(h * np.arange(2 ** order)) ** 2)
        flops = []
        for m in (120, 240):
            rng = np.random.default_rng(16)
            idx = rng.choice(1 << order, size=m, replace=False) + 1
            samples = SampleSet.from_indices(idx, order, values[idx - 1])
            _, report = als_sparse_fit(
                samples,
                AlsConfig(rank=rank, restarts=1, max_iterations=10,
                          tolerance=1e-300))
            flops.append(report.multiply_adds / report.iterations)
        assert 1.8 <= flops[1] / flops[0] <= 2.2

    def test_deterministic_and_restart_choice(self):
        order = 7
        h = 1.0 / (2 ** order - 1)
        values = np.sin(np.pi * h * np.arange(2 ** order))
        rng = np.random.default_rng(17)
        idx = rng.choice(1 << order, size=56, replace=False) + 1
        samples = SampleSet.from_indices(idx, order, values[idx - 1])
        cfg = AlsConfig(rank=2, restarts=3, seed=4, max_iterations=80)
        m1, r1 = als_sparse_fit(samples, cfg)
        m2, r2 = als_sparse_fit(samples, cfg)
        for A, B in zip(m1.factors, m2.factors):
            assert np.array_equal(A, B)
        best = np.inf
        for t in range(3):
            single = AlsConfig(rank=2, restarts=1, seed=4 + t, max_iterations=80)
            _, rep = als_sparse_fit(samples, single)
            best = min(best, rep.final_max_error)
        assert r1.final_max_error == pytest.approx(best, rel=1e-12, abs=1e-15)

    def test_order_one_data(self):
        samples = SampleSet.from_indices(np.array([1, 2]), 1, np.array([3.0, 5.0]))
        _, report = als_sparse_fit(
            samples, AlsConfig(rank=1, restarts=1, max_iterations=20))
        assert report.final_max_error <= 1e-12

    def test_normalized_mode_pins_rows(self):
        order = 6
        h = 1.0 / (2 ** order - 1)
        values = np.exp(-2.0 * h * np.arange(2 ** order))
        samples = full_sample_set(values, order)
        model, _ = als_sparse_fit(
            samples,
            AlsConfig(rank=1, restarts=1, normalized=True, max_iterations=50))
        for A in model.factors[:-1]:
            assert np.all(A[0] == 1.0)
