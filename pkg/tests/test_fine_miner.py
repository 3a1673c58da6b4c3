import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from tzhash.exceptions import DataError, VocabularyError
from tzhash.models.params import ParamStore
from tzhash.models.vocabulary import ClassVocabulary
from tzhash.services import fine_miner
from tzhash.services.fine_miner import FineAssignment, SoftLabelTable
from tzhash.utils import diffcore
from tzhash.utils.diffcore import Tape


def _vocab(seen, novel):
    vectors = np.array(list(seen) + list(novel), dtype=np.float64)
    names = [f"s{i}" for i in range(len(seen))] + [f"n{k}" for k in range(len(novel))]
    mask = np.arange(len(vectors)) >= len(seen)
    return ClassVocabulary(names, vectors, mask)


class TestCosine:
    def test_identical(self):
        assert fine_miner.cosine_sim([0.3, 0.4], [0.3, 0.4]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert fine_miner.cosine_sim([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)

    def test_hand_value(self):
        assert fine_miner.cosine_sim([1.0, 1.0], [1.0, 0.0]) == pytest.approx(1.0 / np.sqrt(2.0))

    def test_zero_norm(self):
        with pytest.raises(VocabularyError):
            fine_miner.cosine_sim([0.0, 0.0], [1.0, 0.0])

    def test_symmetric_and_scale_invariant(self, rng):
        for _ in range(20):
            a, b = rng.standard_normal(5), rng.standard_normal(5)
            s = fine_miner.cosine_sim(a, b)
            assert -1.0 <= s <= 1.0
            assert fine_miner.cosine_sim(b, a) == pytest.approx(s, abs=1e-12)
            alpha, beta = rng.uniform(0.1, 10.0, size=2)
            assert fine_miner.cosine_sim(alpha * a, beta * b) == pytest.approx(s, abs=1e-12)


class TestSoftLabels:
    def test_identical_to_one_novel_class(self):
        vocab = _vocab(seen=[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], novel=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        assert_allclose(fine_miner.soft_labels(np.array([0]), vocab), [[1.0, 0.0]])

    def test_equal_similarity(self):
        vocab = _vocab(seen=[[1.0, 1.0], [1.0, -1.0]], novel=[[1.0, 0.0], [0.0, 1.0]])
        assert_allclose(fine_miner.soft_labels(np.array([0]), vocab), [[0.5, 0.5]])

    def test_hand_normalisation(self):
        # cosines 0.6 and 0.2 against the two unit novel vectors
        seen = [0.6, 0.2, np.sqrt(1.0 - 0.36 - 0.04)]
        vocab = _vocab(seen=[seen, [0.0, 0.0, 1.0]], novel=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        assert_allclose(fine_miner.soft_labels(np.array([0]), vocab), [[0.75, 0.25]])

    def test_negative_cosines_are_clamped(self):
        vocab = _vocab(seen=[[1.0, -1.0], [0.0, 1.0]], novel=[[1.0, 0.0], [0.0, 1.0]])
        assert_allclose(fine_miner.soft_labels(np.array([0]), vocab), [[1.0, 0.0]])

    def test_uniform_fallback_warns(self, caplog):
        vocab = _vocab(seen=[[-1.0, -1.0], [1.0, 0.0]], novel=[[1.0, 0.0], [0.0, 1.0]])
        with caplog.at_level(logging.WARNING, logger="tzhash.services.fine_miner"):
            table = SoftLabelTable(vocab)
        assert_allclose(table(np.array([0])), [[0.5, 0.5]])
        assert "uniform" in caplog.text

    def test_fallback_is_reported_once(self, caplog):
        vocab = _vocab(
            seen=[[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]],
            novel=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        )
        with caplog.at_level(logging.WARNING, logger="tzhash.services.fine_miner"):
            SoftLabelTable(vocab)
        assert len(caplog.records) == 1
        assert "2 of 3" in caplog.text

    def test_rows_sum_to_one_on_random_vocabularies(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            n_seen, n_novel, dim = rng.integers(2, 7), rng.integers(1, 5), rng.integers(2, 9)
            vocab = _vocab(
                seen=rng.standard_normal((n_seen, dim)), novel=rng.standard_normal((n_novel, dim))
            )
            rows = SoftLabelTable(vocab)(vocab.seen_ids)
            assert rows.shape == (n_seen, n_novel)
            assert np.all(rows >= 0.0)
            assert_allclose(rows.sum(axis=1), 1.0, atol=1e-9)

    def test_novel_label_rejected(self, small_vocab):
        with pytest.raises(DataError):
            SoftLabelTable(small_vocab)(np.array([0, 2]))


class TestAssign:
    def test_diagonal(self):
        assert fine_miner.assign([[0.9, 0.1], [0.2, 0.8]]).tolist() == [0, 1]

    def test_duplicates_allowed(self):
        assert fine_miner.assign([[0.6, 0.7], [0.4, 0.3]]).tolist() == [0, 0]

    def test_uniform_ties(self):
        assert fine_miner.assign(np.full((4, 3), 1.0 / 3.0)).tolist() == [0, 0, 0]

    def test_invariant_under_columnwise_increasing_maps(self, rng):
        p = diffcore.softmax_rows(rng.standard_normal((8, 3)))
        expected = fine_miner.assign(p)
        transformed = np.stack([
            3.0 * p[:, 0] - 1.0,
            np.exp(5.0 * p[:, 1]),
            p[:, 2] ** 3 + 0.2,
        ], axis=1)
        assert np.array_equal(fine_miner.assign(transformed), expected)


class TestLoss:
    def test_zero_when_perfect(self):
        p_s = np.array([[1.0, 0.0], [0.0, 1.0]])
        p_u = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
        result = fine_miner.fine_loss(p_s, p_u, FineAssignment([0, 1], p_s.copy()))
        assert result.loss == pytest.approx(0.0, abs=1e-12)

    def test_hand_value(self):
        p = np.array([[0.5, 0.5]])
        result = fine_miner.fine_loss(p, p, FineAssignment([0, 0], np.array([[0.5, 0.5]])))
        assert result.loss == pytest.approx(2.0 * np.log(2.0), abs=1e-12)

    def test_only_assigned_rows_receive_gradient(self, rng):
        p_u = diffcore.softmax_rows(rng.standard_normal((5, 3)))
        p_s = diffcore.softmax_rows(rng.standard_normal((2, 3)))
        idx = fine_miner.assign(p_u)
        _, grad_u = fine_miner.fine_loss(p_s, p_u, FineAssignment(idx, np.full((2, 3), 1.0 / 3.0))).grads
        untouched = np.setdiff1d(np.arange(5), idx)
        assert np.all(grad_u[untouched] == 0.0)

    def test_routing_through_selection(self, rng):
        params = ParamStore()
        fine_miner.init_fine_head(params, 4, 2, rng)
        tape = Tape()
        f_u = tape.constant(rng.standard_normal((8, 4)))
        coarse_rows = np.array([1, 2, 6, 7])
        f_sel = tape.gather_rows(f_u, coarse_rows)
        p_s = fine_miner.score_on_tape(tape, tape.constant(rng.standard_normal((3, 4))), params)
        p_u = fine_miner.score_on_tape(tape, f_sel, params)
        idx = fine_miner.assign(p_u.value)
        soft = np.full((3, 2), 0.5)
        tape.backward(fine_miner.fine_loss_on_tape(tape, p_s, p_u, idx, soft))
        untouched = np.setdiff1d(np.arange(8), coarse_rows[idx])
        assert np.all(f_u.grad[untouched] == 0.0)

    def test_grad_check(self, rng):
        params = ParamStore()
        fine_miner.init_fine_head(params, 4, 3, rng)
        f_s, f_u = rng.standard_normal((4, 4)), rng.standard_normal((5, 4))
        soft = diffcore.softmax_rows(rng.standard_normal((4, 3)))
        tape = Tape()
        idx = fine_miner.assign(fine_miner.score_on_tape(tape, tape.constant(f_u), params).value)

        def loss_fn(p):
            t = Tape()
            out = fine_miner.fine_loss_on_tape(
                t,
                fine_miner.score_on_tape(t, t.constant(f_s), p),
                fine_miner.score_on_tape(t, t.constant(f_u), p),
                idx,
                soft,
            )
            t.backward(out)
            return out.item()

        report = diffcore.grad_check(loss_fn, params)
        assert report.passed, report.errors
