"""Scaled cosine, indicator histogram (oracle), Gaussian soft histogram."""

import numpy as np
import pytest

from oslsp.diffcore import Tensor, grad_check
from oslsp.simhist import (cross_scaled_cosine, gaussian_histogram,
                           indicator_histogram, pairwise_scaled_cosine,
                           scaled_cosine_similarity, total_variation)


class TestScaledCosine:
    def test_parallel_vectors(self):
        x = np.array([1.0, 2.0, -0.5])
        assert scaled_cosine_similarity(x, 3.0 * x).item() == pytest.approx(1.0)

    def test_antiparallel_vectors(self):
        x = np.array([1.0, 2.0, -0.5])
        assert scaled_cosine_similarity(x, -x).item() == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_vectors(self):
        assert scaled_cosine_similarity([1.0, 0.0], [0.0, 2.0]).item() == pytest.approx(0.5)

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError, match="zero-norm"):
            scaled_cosine_similarity([0.0, 0.0], [1.0, 0.0])

    def test_pairwise_matches_scalar(self):
        rng = np.random.default_rng(0)
        x, y = rng.standard_normal((6, 4)), rng.standard_normal((6, 4))
        rows = pairwise_scaled_cosine(Tensor(x), Tensor(y)).data
        singles = [scaled_cosine_similarity(x[i], y[i]).item() for i in range(6)]
        np.testing.assert_allclose(rows, singles, atol=1e-12)

    def test_cross_covers_all_pairs(self):
        rng = np.random.default_rng(1)
        x, y = rng.standard_normal((3, 4)), rng.standard_normal((2, 4))
        flat = cross_scaled_cosine(Tensor(x), Tensor(y)).data
        assert flat.shape == (6,)
        expected = [scaled_cosine_similarity(x[i], y[j]).item()
                    for i in range(3) for j in range(2)]
        np.testing.assert_allclose(flat, expected, atol=1e-12)


class TestIndicatorHistogram:
    def test_places_interior_value(self):
        h = indicator_histogram([0.55], bins=10)
        expected = np.zeros(10)
        expected[5] = 1.0
        np.testing.assert_array_equal(h.values, expected)

    def test_top_edge_goes_to_last_bin(self):
        h = indicator_histogram([1.0], bins=10)
        assert h.values[9] == 1.0 and h.values.sum() == 1.0

    def test_counts_sum_to_sample_count(self):
        rng = np.random.default_rng(4)
        sims = rng.random(321)
        assert indicator_histogram(sims, 17).values.sum() == 321

    def test_uniform_data_chi_square(self):
        rng = np.random.default_rng(2024)
        counts = indicator_histogram(rng.random(1000), bins=10).values
        chi2 = np.sum((counts - 100.0) ** 2 / 100.0)
        # chi-square(9 dof) 0.999 quantile is 27.88
        assert chi2 < 27.88

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            indicator_histogram([1.2], 10)
        with pytest.raises(ValueError):
            indicator_histogram([-0.1], 10)
        with pytest.raises(ValueError):
            indicator_histogram([0.5], 0)


class TestGaussianHistogram:
    def test_peak_and_symmetry_at_a_bin_center(self):
        h = gaussian_histogram([0.45], bins=10, sigma=0.1)  # center of bin 4
        v = h.values.data
        assert np.argmax(v) == 4
        np.testing.assert_allclose(v[3], v[5], rtol=1e-12)
        np.testing.assert_allclose(v[2], v[6], rtol=1e-12)

    def test_normalized_mass_is_one(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            h = gaussian_histogram(rng.random(30), bins=20, sigma=0.07)
            assert abs(h.values.data.sum() - 1.0) < 1e-9

    def test_small_sigma_converges_to_indicator(self):
        # Center-evaluated kernels misweight samples sitting close to a bin
        # edge once sigma falls below the edge distance, so the convergence
        # statement holds for similarities away from bin edges.
        rng = np.random.default_rng(77)
        sims = (rng.integers(0, 20, size=500) + 0.5) / 20.0
        sims = sims + rng.uniform(-1 / 160, 1 / 160, size=500)
        soft = gaussian_histogram(sims, bins=20, sigma=0.005)
        hard = indicator_histogram(sims, bins=20)
        assert total_variation(soft, hard) < 0.05

    def test_tv_decreases_monotonically_with_sigma(self):
        # Random per-bin counts with samples at the bin centers: there the
        # only soft-vs-hard discrepancy is cross-bin leakage, which shrinks
        # strictly as sigma does.
        rng = np.random.default_rng(13)
        sims = (rng.integers(0, 20, size=400) + 0.5) / 20.0
        hard = indicator_histogram(sims, bins=20)
        tvs = [total_variation(gaussian_histogram(sims, 20, s), hard)
               for s in (0.1, 0.05, 0.01, 0.005)]
        assert all(a > b for a, b in zip(tvs, tvs[1:]))

    def test_translation_shifts_mass_one_bin(self):
        # b=16 makes the bin width exactly representable, so the shifted
        # kernel evaluations are bitwise-comparable.
        sims = np.array([10, 13, 22, 37, 41], dtype=np.float64) / 64.0
        before = gaussian_histogram(sims, bins=16, sigma=0.05, normalized=False)
        after = gaussian_histogram(sims + 1.0 / 16.0, bins=16, sigma=0.05, normalized=False)
        np.testing.assert_allclose(after.values.data[1:], before.values.data[:-1],
                                   rtol=1e-12)

    def test_gradient_reaches_every_input(self):
        sims = Tensor(np.array([0.2, 0.5, 0.9]), requires_grad=True)

        def f():
            return gaussian_histogram(sims, bins=10, sigma=0.1).values[5]

        assert grad_check(f, [sims]) < 1e-4

    def test_accepts_list_of_scalars(self):
        parts = [Tensor(0.3, requires_grad=True), Tensor(0.7, requires_grad=True)]
        h = gaussian_histogram(parts, bins=10, sigma=0.1)
        h.values.sum().backward()
        assert parts[0].grad is not None and parts[1].grad is not None

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError):
            gaussian_histogram([0.5], bins=10, sigma=0.0)
        with pytest.raises(ValueError):
            gaussian_histogram([0.5], bins=10, sigma=-1.0)


class TestHistogramContainer:
    def test_bin_geometry(self):
        h = indicator_histogram([0.5], bins=8)
        assert h.delta == pytest.approx(1.0 / 8.0)
        np.testing.assert_allclose(h.centers, (np.arange(8) + 0.5) / 8.0)

    def test_csv_rows(self):
        h = indicator_histogram([0.55, 0.05], bins=10)
        rows = h.to_csv_rows()
        assert len(rows) == 10
        assert rows[0] == (0.05, 1.0)
        assert rows[5] == (0.55, 1.0)

    def test_tv_requires_matching_bins(self):
        with pytest.raises(ValueError):
            total_variation(indicator_histogram([0.5], 10), indicator_histogram([0.5], 8))
