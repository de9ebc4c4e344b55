"""KL losses: ground-truth discretization, similarity-proportion loss,
prediction aggregation, proportion loss."""

import numpy as np
import pytest

from oslsp.diffcore import Tensor, grad_check
from oslsp.losses import (aggregate_predictions, discretize_ground_truth,
                          kl_divergence, prop_loss, sim_prop_loss)
from oslsp.ordinal import GroundTruthSimPDF, ground_truth_pdf, similarity_values


def random_simplex(rng, k):
    v = rng.random(k)
    return v / v.sum()


class TestDiscretizeGroundTruth:
    def test_single_atom_at_one_decays_monotonically(self):
        pdf = ground_truth_pdf([1, 0, 0, 0, 0], [1, 0, 0, 0, 0])
        values = discretize_ground_truth(pdf, bins=20, sigma=0.1).values_array()
        assert np.argmax(values) == 19
        assert np.all(np.diff(values) > 0)  # rises toward s=1

    def test_two_extreme_atoms_are_symmetric_modes(self):
        pdf = GroundTruthSimPDF(values=similarity_values(2),
                                masses=np.array([0.5, 0.5]))
        values = discretize_ground_truth(pdf, bins=20, sigma=0.02).values_array()
        np.testing.assert_allclose(values, values[::-1], rtol=1e-9)
        assert values[0] > values[10] and values[-1] > values[10]

    def test_uniform_atoms_give_near_uniform_interior(self):
        pdf = GroundTruthSimPDF(values=similarity_values(5),
                                masses=np.full(5, 0.2))
        values = discretize_ground_truth(pdf, bins=20, sigma=0.1).values_array()
        interior = values[4:16]
        assert interior.max() / interior.min() < 1.25

    def test_strictly_positive_and_normalized(self):
        pdf = ground_truth_pdf([1, 0, 0, 0, 0], [1, 0, 0, 0, 0])
        for sigma in (0.1, 0.01, 0.003):
            values = discretize_ground_truth(pdf, bins=20, sigma=sigma).values_array()
            assert np.all(values > 0)
            assert abs(values.sum() - 1.0) < 1e-12

    def test_hard_mode_assigns_atom_bins(self):
        pdf = ground_truth_pdf([0.5, 0.5, 0, 0, 0], [0.5, 0.5, 0, 0, 0])
        values = discretize_ground_truth(pdf, bins=20, sigma=0.1, mode="hard").values_array()
        # atoms at s=1 (bin 19) and s=0.75 (bin 15), half mass each
        assert values[19] == pytest.approx(0.5, abs=1e-9)
        assert values[15] == pytest.approx(0.5, abs=1e-9)

    def test_rejects_unknown_mode(self):
        pdf = ground_truth_pdf([1, 0], [1, 0])
        with pytest.raises(ValueError):
            discretize_ground_truth(pdf, bins=20, sigma=0.1, mode="nearest")


class TestKlDivergence:
    def test_zero_on_equal_distributions(self):
        p = np.array([0.2, 0.3, 0.5])
        assert kl_divergence(p, p.copy()).item() == pytest.approx(0.0, abs=1e-12)

    def test_nonnegative_on_random_pairs(self):
        rng = np.random.default_rng(555)
        for _ in range(1000):
            k = int(rng.integers(2, 8))
            p, q = random_simplex(rng, k), random_simplex(rng, k)
            assert kl_divergence(p, q).item() >= -1e-9

    def test_reversal_symmetric_pair_hand_value(self):
        # [0.9,0.1] vs [0.1,0.9] is reversal-symmetric: both orders equal
        # 0.8*ln(9). The value pins the formula; direction is pinned below.
        expected = 0.8 * np.log(9.0)
        assert kl_divergence([0.9, 0.1], [0.1, 0.9]).item() == pytest.approx(expected)
        assert kl_divergence([0.1, 0.9], [0.9, 0.1]).item() == pytest.approx(expected)

    def test_direction_matters_on_asymmetric_pair(self):
        a, b = np.array([0.9, 0.1]), np.array([0.6, 0.4])
        forward = kl_divergence(a, b).item()
        backward = kl_divergence(b, a).item()
        assert forward != pytest.approx(backward, abs=1e-6)

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            kl_divergence([0.5, 0.5], [0.2, 0.3, 0.5])


class TestSimPropLoss:
    def _one_hot_bags(self, rng, n=8, d=6):
        feats = rng.standard_normal((n, d))
        return Tensor(feats), Tensor(feats.copy())

    def test_zero_when_predicted_matches_target(self):
        # Same one-class proportions and identical features: all similarities
        # are exactly 1, matching the target atom at s=1 smoothed with the
        # same kernel, so the KL vanishes.
        rng = np.random.default_rng(21)
        feats_a, feats_b = self._one_hot_bags(rng)
        one_hot = np.array([1.0, 0, 0, 0, 0])
        loss = sim_prop_loss(feats_a, feats_b, one_hot, one_hot, bins=20, sigma=0.1)
        assert abs(loss.item()) < 1e-6

    def test_large_when_bags_should_be_dissimilar(self):
        rng = np.random.default_rng(22)
        feats_a, feats_b = self._one_hot_bags(rng)
        loss = sim_prop_loss(feats_a, feats_b,
                             np.array([1.0, 0, 0, 0, 0]), np.array([0, 0, 0, 0, 1.0]),
                             bins=20, sigma=0.1)
        assert loss.item() > 1.0

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(23)
        feats_a = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
        feats_b = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
        p_a = np.array([0.5, 0.5, 0, 0, 0])
        p_b = np.array([0, 0, 0.2, 0.3, 0.5])

        def f():
            return sim_prop_loss(feats_a, feats_b, p_a, p_b, bins=20, sigma=0.1)

        assert grad_check(f, [feats_a, feats_b], h=1e-5) < 1e-4

    def test_full_cross_pairing(self):
        rng = np.random.default_rng(24)
        feats_a = Tensor(rng.standard_normal((5, 4)))
        feats_b = Tensor(rng.standard_normal((5, 4)))
        p = np.array([0.5, 0.5])
        aligned = sim_prop_loss(feats_a, feats_b, p, p, bins=10, sigma=0.1)
        crossed = sim_prop_loss(feats_a, feats_b, p, p, bins=10, sigma=0.1,
                                pairing="full-cross")
        assert aligned.item() != pytest.approx(crossed.item(), abs=1e-9)

    def test_bag_size_mismatch_rejected(self):
        rng = np.random.default_rng(25)
        with pytest.raises(ValueError, match="bag size mismatch"):
            sim_prop_loss(Tensor(rng.standard_normal((3, 4))),
                          Tensor(rng.standard_normal((4, 4))),
                          np.array([1.0, 0.0]), np.array([1.0, 0.0]))

    def test_nonnegative_on_random_inputs(self):
        rng = np.random.default_rng(26)
        for _ in range(20):
            feats_a = Tensor(rng.standard_normal((6, 4)))
            feats_b = Tensor(rng.standard_normal((6, 4)))
            p_a, p_b = random_simplex(rng, 5), random_simplex(rng, 5)
            assert sim_prop_loss(feats_a, feats_b, p_a, p_b).item() >= -1e-9


class TestAggregatePredictions:
    def test_single_row_is_identity(self):
        row = np.array([[0.1, 0.2, 0.7]])
        np.testing.assert_allclose(aggregate_predictions(row).data, row[0])

    def test_mean_of_one_hot_rows(self):
        rows = np.array([[1.0, 0, 0, 0, 0], [0, 1.0, 0, 0, 0]])
        np.testing.assert_allclose(aggregate_predictions(rows).data,
                                   [0.5, 0.5, 0, 0, 0])

    def test_output_sums_to_one(self):
        rng = np.random.default_rng(30)
        for _ in range(50):
            raw = rng.random((12, 6))
            rows = raw / raw.sum(axis=1, keepdims=True)
            assert abs(aggregate_predictions(rows).data.sum() - 1.0) < 1e-9

    def test_empty_bag_rejected(self):
        with pytest.raises(ValueError):
            aggregate_predictions(np.zeros((0, 5)))

    def test_rejects_non_simplex_rows(self):
        with pytest.raises(ValueError):
            aggregate_predictions(np.array([[0.5, 0.2]]))


class TestPropLoss:
    def test_zero_on_equal(self):
        p = np.array([0.25, 0.25, 0.5])
        assert prop_loss(p, Tensor(p.copy())).item() == pytest.approx(0.0, abs=1e-12)

    def test_hand_computed_values(self):
        v = prop_loss(np.array([0.5, 0.5]), Tensor(np.array([0.25, 0.75]))).item()
        assert v == pytest.approx(0.5 * np.log(2.0) + 0.5 * np.log(2.0 / 3.0), abs=1e-12)
        v = prop_loss(np.array([1.0, 0.0]), Tensor(np.array([0.5, 0.5]))).item()
        assert v == pytest.approx(np.log(2.0), abs=1e-12)

    def test_direction_is_truth_first(self):
        # Swapping the arguments must change the value on an asymmetric pair.
        p, q = np.array([0.9, 0.1]), np.array([0.6, 0.4])
        assert prop_loss(p, Tensor(q)).item() != pytest.approx(
            prop_loss(q, Tensor(p)).item(), abs=1e-6)
        # and the formula weights by the first argument:
        expected = 0.9 * np.log(0.9 / 0.6) + 0.1 * np.log(0.1 / 0.4)
        assert prop_loss(p, Tensor(q)).item() == pytest.approx(expected, abs=1e-12)

    def test_differentiable_in_prediction(self):
        logits = Tensor(np.array([0.3, -0.2, 0.8]), requires_grad=True)
        p = np.array([0.6, 0.3, 0.1])

        def f():
            exps = logits.exp()
            return prop_loss(p, exps / exps.sum())

        assert grad_check(f, [logits]) < 1e-6

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            prop_loss(np.array([0.5, 0.5]), Tensor(np.array([0.2, 0.3, 0.5])))

    def test_nonnegative_on_random_pairs(self):
        rng = np.random.default_rng(31)
        for _ in range(1000):
            k = int(rng.integers(2, 8))
            p, q = random_simplex(rng, k), random_simplex(rng, k)
            assert prop_loss(p, Tensor(q)).item() >= -1e-9
