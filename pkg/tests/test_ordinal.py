"""Ordinal class similarity and the ground-truth similarity distribution."""

import numpy as np
import pytest

from oslsp.ordinal import (class_similarity, ground_truth_pdf, similarity_matrix,
                           similarity_values, validate_proportions)


def brute_force_pdf(p, p_prime):
    """Oracle: accumulate every ordered class pair (k, k') independently."""
    k = len(p)
    atoms = {m: 0.0 for m in range(k)}
    for a in range(k):
        for b in range(k):
            atoms[abs(a - b)] += p[a] * p_prime[b]
    return np.array([atoms[m] for m in range(k)])


def random_simplex(rng, k):
    v = rng.random(k)
    return v / v.sum()


class TestClassSimilarity:
    def test_identical_classes(self):
        assert class_similarity(3, 3, 5) == 1.0

    def test_extreme_classes(self):
        assert class_similarity(1, 5, 5) == 0.0

    def test_interior_pair(self):
        assert class_similarity(2, 4, 5) == 0.5

    def test_strictly_decreasing_in_distance(self):
        for k in (2, 3, 5, 9):
            sims = [class_similarity(1, 1 + m, k) for m in range(k)]
            assert all(a > b for a, b in zip(sims, sims[1:]))

    def test_index_validation(self):
        with pytest.raises(ValueError):
            class_similarity(0, 1, 5)
        with pytest.raises(ValueError):
            class_similarity(1, 6, 5)
        with pytest.raises(ValueError):
            class_similarity(1, 1, 1)


class TestSimilarityMatrix:
    @pytest.mark.parametrize("k", [2, 3, 5, 7])
    def test_invariants(self, k):
        m = similarity_matrix(k)
        np.testing.assert_array_equal(np.diag(m), np.ones(k))
        np.testing.assert_array_equal(m, m.T)
        assert m[0, k - 1] == 0.0
        np.testing.assert_allclose(np.unique(m), np.sort(similarity_values(k)))


class TestGroundTruthPdf:
    def test_single_shared_class(self):
        pdf = ground_truth_pdf([1, 0, 0, 0, 0], [1, 0, 0, 0, 0])
        assert pdf.masses[0] == 1.0
        assert pdf.masses[1:].sum() == 0.0
        assert pdf.values[0] == 1.0

    def test_extreme_classes_only(self):
        pdf = ground_truth_pdf([1, 0, 0, 0, 0], [0, 0, 0, 0, 1])
        assert pdf.atoms()[0.0] == 1.0
        assert pdf.total_mass() == pytest.approx(1.0, abs=1e-12)

    def test_two_class_mixture(self):
        # Frozen from the brute-force oracle: equal mass on s=1 and s=0.75.
        pdf = ground_truth_pdf([0.5, 0.5, 0, 0, 0], [0.5, 0.5, 0, 0, 0])
        atoms = pdf.atoms()
        assert atoms[1.0] == pytest.approx(0.5, abs=1e-12)
        assert atoms[0.75] == pytest.approx(0.5, abs=1e-12)
        assert sum(atoms.values()) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("k", [2, 3, 5, 7])
    def test_matches_brute_force_enumeration(self, k):
        rng = np.random.default_rng(100 + k)
        for _ in range(100):
            p, q = random_simplex(rng, k), random_simplex(rng, k)
            pdf = ground_truth_pdf(p, q)
            assert abs(pdf.total_mass() - 1.0) < 1e-9
            np.testing.assert_allclose(pdf.masses, brute_force_pdf(p, q), atol=1e-12)

    def test_symmetric_in_arguments(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            p, q = random_simplex(rng, 5), random_simplex(rng, 5)
            np.testing.assert_array_equal(ground_truth_pdf(p, q).masses,
                                          ground_truth_pdf(q, p).masses)

    def test_rejects_mismatched_or_unnormalized(self):
        with pytest.raises(ValueError):
            ground_truth_pdf([0.5, 0.5], [0.3, 0.3, 0.4])
        with pytest.raises(ValueError):
            ground_truth_pdf([0.6, 0.6], [0.5, 0.5])


class TestValidateProportions:
    def test_accepts_valid(self):
        out = validate_proportions([0.25, 0.75])
        assert out.dtype == np.float64

    def test_rejects_negative_and_sum(self):
        with pytest.raises(ValueError):
            validate_proportions([-0.1, 1.1])
        with pytest.raises(ValueError):
            validate_proportions([0.2, 0.2])
        with pytest.raises(ValueError):
            validate_proportions(np.ones((2, 2)) / 2)
