import numpy as np
import pytest
from numpy.testing import assert_allclose

from tzhash.exceptions import DimensionError, TrainingError
from tzhash.models.params import ParamStore
from tzhash.utils import diffcore
from tzhash.utils.diffcore import Tape


class TestForward:
    def test_linear_identity(self):
        out = diffcore.linear([[1, 0]], [[1, 0], [0, 1]], [0, 0])
        assert_allclose(out, [[1, 0]])

    def test_linear_sum_plus_bias(self):
        assert_allclose(diffcore.linear([[1, 2]], [[1], [1]], [3]), [[6]])

    def test_linear_shape_mismatch(self):
        with pytest.raises(DimensionError):
            diffcore.linear([[1, 2, 3]], [[1], [1]], [0])

    def test_linear_bias_mismatch(self):
        with pytest.raises(DimensionError):
            diffcore.linear([[1, 2]], [[1], [1]], [0, 0])

    def test_softmax_symmetric(self):
        assert_allclose(diffcore.softmax_rows([[0.0, 0.0]]), [[0.5, 0.5]])

    def test_softmax_large_logits(self):
        p = diffcore.softmax_rows([[1000.0, 0.0]])
        assert np.all(np.isfinite(p))
        assert_allclose(p, [[1.0, 0.0]], atol=1e-12)

    def test_softmax_rows_sum_to_one(self, rng):
        p = diffcore.softmax_rows(rng.standard_normal((3, 5)))
        assert_allclose(p.sum(axis=1), np.ones(3), atol=1e-12)

    def test_sq_dists(self):
        d = diffcore.sq_dists([[0.0, 0.0], [3.0, 4.0]])
        assert_allclose(d, [[0.0, 25.0], [25.0, 0.0]])


class TestSgd:
    def test_single_update(self):
        params = ParamStore()
        params.add("p", [[1.0]])
        params.grads["p"][:] = 2.0
        diffcore.sgd_step(params, 0.1)
        assert_allclose(params["p"], [[0.8]])
        assert params.grads["p"][0, 0] == 0.0
        assert params.step == 1

    def test_zero_lr_is_identity(self, rng):
        params = ParamStore()
        params.add("w", rng.standard_normal((3, 2)))
        before = params["w"].copy()
        params.grads["w"][:] = rng.standard_normal((3, 2))
        diffcore.sgd_step(params, 0.0)
        assert np.array_equal(params["w"], before)

    def test_two_steps_equal_one_doubled(self, rng):
        g = rng.standard_normal((2, 2))
        a, b = ParamStore(), ParamStore()
        init = rng.standard_normal((2, 2))
        a.add("w", init)
        b.add("w", init)
        for _ in range(2):
            a.grads["w"][:] = g
            diffcore.sgd_step(a, 0.05)
        b.grads["w"][:] = g
        diffcore.sgd_step(b, 0.1)
        assert_allclose(a["w"], b["w"], rtol=0, atol=1e-14)

    def test_non_finite_gradient_names_parameter(self):
        params = ParamStore()
        params.add("hash.W", [[1.0, 2.0]])
        params.grads["hash.W"][0, 1] = np.nan
        with pytest.raises(TrainingError) as exc:
            diffcore.sgd_step(params, 0.1)
        assert exc.value.param == "hash.W"
        assert "hash.W" in str(exc.value)


class TestTape:
    def test_backward_needs_scalar(self):
        tape = Tape()
        x = tape.constant([[1.0, 2.0]])
        with pytest.raises(DimensionError):
            tape.backward(tape.relu(x))

    def test_gather_rows_scatters_into_selected_rows(self):
        tape = Tape()
        x = tape.constant(np.arange(8.0).reshape(4, 2))
        picked = tape.gather_rows(x, [2, 2, 0])
        out = tape.masked_sum(picked, np.ones((3, 2)))
        tape.backward(out)
        assert np.array_equal(x.grad, [[1.0, 1.0], [0.0, 0.0], [2.0, 2.0], [0.0, 0.0]])

    def test_concat_rows_splits_gradient(self):
        tape = Tape()
        a = tape.constant([[1.0, 1.0]])
        b = tape.constant([[2.0, 2.0], [3.0, 3.0]])
        out = tape.masked_sum(tape.concat_rows([a, b]), [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        tape.backward(out)
        assert_allclose(a.grad, [[1.0, 2.0]])
        assert_allclose(b.grad, [[3.0, 4.0], [5.0, 6.0]])

    def test_log_loss_zero_weight_gets_no_gradient(self):
        tape = Tape()
        p = tape.constant([[0.5, 0.5], [0.2, 0.8]])
        out = tape.log_loss(p, np.array([[1.0, 0.0], [0.0, 0.0]]))
        tape.backward(out)
        assert_allclose(out.item(), np.log(2.0))
        assert np.array_equal(p.grad, [[-2.0, 0.0], [0.0, 0.0]])

    def test_hinge_inactive_beyond_margin(self):
        tape = Tape()
        x = tape.constant([[0.5, 3.0]])
        out = tape.masked_sum(tape.hinge(x, 1.0), np.ones((1, 2)))
        tape.backward(out)
        assert_allclose(out.item(), 0.5)
        assert_allclose(x.grad, [[-1.0, 0.0]])


class TestGradCheck:
    def test_linear(self, rng):
        params = ParamStore()
        params.add("x", rng.standard_normal((4, 3)))
        params.add("W", rng.standard_normal((3, 2)))
        params.add("b", rng.standard_normal((1, 2)))
        mask = rng.standard_normal((4, 2))

        def loss_fn(p):
            tape = Tape()
            out = tape.masked_sum(tape.linear(tape.param(p, "x"), tape.param(p, "W"), tape.param(p, "b")), mask)
            tape.backward(out)
            return out.item()

        report = diffcore.grad_check(loss_fn, params, eps=1e-5, tol=1e-6)
        assert report.passed, report.errors

    def test_quadratic(self, rng):
        params = ParamStore()
        params.add("p", rng.standard_normal((1, 5)))

        def loss_fn(p):
            tape = Tape()
            stacked = tape.concat_rows([tape.param(p, "p"), tape.constant(np.zeros((1, 5)))])
            out = tape.masked_sum(tape.sq_dists(stacked), [[0.0, 1.0], [0.0, 0.0]])
            tape.backward(out)
            return out.item()

        tape_value = loss_fn(params)
        assert_allclose(tape_value, float((params["p"] ** 2).sum()))
        report = diffcore.grad_check(loss_fn, params, tol=1e-8)
        assert report.passed, report.errors

    def test_softmax_relu_chain(self, rng):
        params = ParamStore()
        params.add("W1", rng.standard_normal((3, 4)))
        params.add("W2", rng.standard_normal((4, 3)))
        params.add("b2", rng.standard_normal((1, 3)))
        x = rng.standard_normal((5, 3))
        weights = rng.uniform(0.0, 1.0, size=(5, 3))

        def loss_fn(p):
            tape = Tape()
            zero = tape.constant(np.zeros((1, 4)))
            hidden = tape.relu(tape.linear(tape.constant(x), tape.param(p, "W1"), zero))
            probs = tape.softmax_rows(tape.linear(hidden, tape.param(p, "W2"), tape.param(p, "b2")))
            out = tape.log_loss(probs, weights)
            tape.backward(out)
            return out.item()

        report = diffcore.grad_check(loss_fn, params)
        assert report.passed, report.errors

    def test_shared_bias_has_zero_gradient(self, rng):
        # pairwise distances ignore a bias added to every row
        params = ParamStore()
        params.add("W", rng.standard_normal((3, 4)))
        params.add("b", rng.standard_normal((1, 4)))
        x = rng.standard_normal((6, 3))
        mask = rng.uniform(0.0, 1.0, size=(6, 6))

        def loss_fn(p):
            tape = Tape()
            h = tape.linear(tape.constant(x), tape.param(p, "W"), tape.param(p, "b"))
            out = tape.masked_sum(tape.sq_dists(h), mask)
            tape.backward(out)
            return out.item()

        loss_fn(params)
        assert np.abs(params.grads["b"]).max() < 1e-10
        report = diffcore.grad_check(loss_fn, params)
        assert report.passed, report.errors

    def test_relative_error(self):
        assert diffcore.relative_error(np.zeros(3), np.zeros(3)) == 0.0
        assert_allclose(diffcore.relative_error(np.array([1.0]), np.array([3.0])), 0.5)

    def test_relative_error_of_noise_is_absolute(self):
        err = diffcore.relative_error(np.array([2.8e-17, -1e-17]), np.array([3e-11, -2e-11]))
        assert err < 1e-10
        assert diffcore.relative_error(np.array([1e-3]), np.array([-1e-3])) == 1.0
