import numpy as np
import pytest
from numpy.testing import assert_allclose

from tzhash.exceptions import ConfigurationError, DimensionError
from tzhash.models.params import ParamStore
from tzhash.services import hash_loss
from tzhash.services.hash_loss import HashBatch, PairLabel
from tzhash.utils import diffcore
from tzhash.utils.diffcore import Tape

S, D, X = PairLabel.SIMILAR, PairLabel.DISSIMILAR, PairLabel.EXCLUDED


class TestPairLabels:
    def test_source_pairs_follow_labels(self):
        batch = HashBatch(h=np.ones((3, 4)), is_target=[False] * 3, classes=[0, 0, 1])
        labels = hash_loss.pair_labels(batch, tau_sim=1, tau_dis=2)
        assert labels[0, 1] == S and labels[1, 0] == S
        assert labels[0, 2] == D and labels[1, 2] == D

    def test_source_target_always_dissimilar(self):
        # same class and identical codes still count as dissimilar across origins
        batch = HashBatch(h=np.ones((2, 4)), is_target=[False, True], classes=[3, 3])
        labels = hash_loss.pair_labels(batch, tau_sim=1, tau_dis=2)
        assert labels[0, 1] == D and labels[1, 0] == D

    def test_target_pair_rules(self):
        h = np.array([
            [1.0, 1.0, 1.0, 1.0],
            [1.0, 1.0, 1.0, 1.0],     # same class, Hamming 0
            [-1.0, -1.0, -1.0, 1.0],  # same class, Hamming 3
            [-1.0, -1.0, -1.0, -1.0], # other class, Hamming 4
            [1.0, 1.0, 1.0, -1.0],    # other class, Hamming 1
        ])
        batch = HashBatch(h=h, is_target=[True] * 5, classes=[7, 7, 7, 8, 8])
        labels = hash_loss.pair_labels(batch, tau_sim=1, tau_dis=3)
        assert labels[0, 1] == S
        assert labels[0, 2] == X
        assert labels[0, 3] == D
        assert labels[0, 4] == X

    def test_symmetric_with_excluded_diagonal(self, rng):
        batch = HashBatch(
            h=rng.standard_normal((7, 8)),
            is_target=[False, False, False, True, True, True, True],
            classes=rng.integers(0, 3, size=7),
        )
        labels = hash_loss.pair_labels(batch, tau_sim=2, tau_dis=4)
        assert np.array_equal(labels, labels.T)
        assert np.all(np.diag(labels) == X)

    def test_thresholds_out_of_order(self):
        batch = HashBatch(h=np.ones((2, 4)), is_target=[True, True], classes=[0, 0])
        with pytest.raises(DimensionError):
            hash_loss.pair_labels(batch, tau_sim=3, tau_dis=2)

    def test_invariant_under_class_relabelling(self, rng):
        classes = rng.integers(0, 4, size=9)
        is_target = [False] * 5 + [True] * 4
        h = rng.standard_normal((9, 6))
        relabel = np.array([11, 3, 7, 0])
        before = hash_loss.pair_labels(HashBatch(h, is_target, classes), tau_sim=1, tau_dis=4)
        after = hash_loss.pair_labels(HashBatch(h, is_target, relabel[classes]), tau_sim=1, tau_dis=4)
        assert np.array_equal(before, after)


class TestContrastive:
    def test_identical_similar_rows(self):
        batch = HashBatch(h=np.tile([0.3, -0.7, 1.2], (4, 1)), is_target=[False] * 4, classes=[1] * 4)
        labels = hash_loss.pair_labels(batch, 0, 3)
        assert hash_loss.contrastive_loss(batch, labels, eps=6.0).loss == pytest.approx(0.0)

    def test_similar_pair_hand_value(self):
        batch = HashBatch(h=[[1.0, 1.0], [-1.0, 1.0]], is_target=[False, False], classes=[0, 0])
        labels = np.array([[X, S], [S, X]], dtype=np.int8)
        assert hash_loss.contrastive_loss(batch, labels, eps=4.0, normalize=False).loss == pytest.approx(8.0)
        # two ordered pairs
        assert hash_loss.contrastive_loss(batch, labels, eps=4.0).loss == pytest.approx(4.0)

    def test_dissimilar_pair_beyond_margin(self):
        batch = HashBatch(h=[[1.0, 1.0], [-1.0, 1.0]], is_target=[False, False], classes=[0, 1])
        labels = np.array([[X, D], [D, X]], dtype=np.int8)
        result = hash_loss.contrastive_loss(batch, labels, eps=4.0)
        assert result.loss == pytest.approx(0.0)
        assert np.all(result.grads[0] == 0.0)

    def test_dissimilar_pair_inside_margin(self):
        batch = HashBatch(h=[[0.0, 0.0], [1.0, 0.0]], is_target=[False, False], classes=[0, 1])
        labels = np.array([[X, D], [D, X]], dtype=np.int8)
        assert hash_loss.contrastive_loss(batch, labels, eps=3.0).loss == pytest.approx(2.0)

    def test_excluded_pairs_contribute_nothing(self, rng):
        batch = HashBatch(h=rng.standard_normal((3, 4)), is_target=[True] * 3, classes=[0, 1, 2])
        result = hash_loss.contrastive_loss(batch, np.full((3, 3), X, dtype=np.int8), eps=8.0)
        assert result.loss == 0.0
        assert np.all(result.grads[0] == 0.0)

    def test_non_negative_with_balanced_gradients(self, rng):
        for _ in range(10):
            batch = HashBatch(
                h=rng.standard_normal((8, 5)),
                is_target=[False] * 5 + [True] * 3,
                classes=rng.integers(0, 3, size=8),
            )
            labels = hash_loss.pair_labels(batch, tau_sim=2, tau_dis=3)
            result = hash_loss.contrastive_loss(batch, labels, eps=10.0)
            assert result.loss >= 0.0
            # each pair pushes h_i and h_k with opposite gradients
            assert_allclose(result.grads[0].sum(axis=0), 0.0, atol=1e-12)

    def test_non_positive_margin(self):
        batch = HashBatch(h=np.ones((2, 4)), is_target=[False, False], classes=[0, 1])
        labels = np.array([[X, D], [D, X]], dtype=np.int8)
        with pytest.raises(ConfigurationError):
            hash_loss.contrastive_loss(batch, labels, eps=0.0)

    def test_grad_check_with_frozen_labels(self, rng):
        params = ParamStore()
        hash_loss.init_hash_head(params, 5, 6, rng)
        f = rng.standard_normal((7, 5))
        h = hash_loss.relaxed_codes(f, params)
        batch = HashBatch(h, is_target=[False] * 4 + [True] * 3, classes=[0, 0, 1, 2, 3, 3, 4])
        labels = hash_loss.pair_labels(batch, tau_sim=1, tau_dis=3)

        def loss_fn(p):
            tape = Tape()
            out = hash_loss.contrastive_on_tape(tape, hash_loss.codes_on_tape(tape, tape.constant(f), p), labels, 4.0)
            tape.backward(out)
            return out.item()

        report = diffcore.grad_check(loss_fn, params)
        assert report.passed, report.errors

    def test_gradient_matches_finite_differences_on_codes(self, rng):
        h0 = rng.standard_normal((5, 3))
        labels = hash_loss.pair_labels(
            HashBatch(h0, is_target=[False] * 5, classes=[0, 1, 0, 1, 2]), tau_sim=0, tau_dis=3
        )
        params = ParamStore()
        params.add("h", h0)

        def loss_fn(p):
            tape = Tape()
            out = hash_loss.contrastive_on_tape(tape, tape.param(p, "h"), labels, 5.0)
            tape.backward(out)
            return out.item()

        report = diffcore.grad_check(loss_fn, params)
        assert report.passed, report.errors
        analytic = hash_loss.contrastive_loss(HashBatch(h0, [False] * 5, [0, 1, 0, 1, 2]), labels, 5.0).grads[0]
        params.zero_grad()
        loss_fn(params)
        assert_allclose(analytic, params.grads["h"])
