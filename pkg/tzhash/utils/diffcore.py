"""
Minimal dense reverse-mode differentiation over float64 matrices.

Forward ops exist both as plain functions (inference) and as ``Tape`` methods that record a
backward closure. Discrete choices (row selections, pair labels) enter the tape as constants,
so backward treats them as fixed.
"""

import math
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import DimensionError, TrainingError
from ..models.params import ParamStore
from ..schemas.metrics import GradCheckReport

Tensor2 = np.ndarray

PROB_FLOOR = 1e-12
# gradients smaller than this are finite-difference noise
GRAD_ATOL = 1e-7


def as_tensor2(x, name: str = "tensor") -> Tensor2:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {x.shape}")
    return x


# --- forward ops ---

def linear(x: Tensor2, W: Tensor2, b: Tensor2) -> Tensor2:
    x, W, b = as_tensor2(x, "x"), as_tensor2(W, "W"), as_tensor2(b, "b")
    if x.shape[1] != W.shape[0]:
        raise DimensionError(f"linear: x is {x.shape}, W is {W.shape}")
    if b.shape != (1, W.shape[1]):
        raise DimensionError(f"linear: bias {b.shape} does not match {W.shape[1]} outputs")
    return x @ W + b


def relu(x: Tensor2) -> Tensor2:
    return np.maximum(x, 0.0)


def softmax_rows(x: Tensor2) -> Tensor2:
    x = as_tensor2(x)
    z = np.exp(x - x.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def sq_dists(h: Tensor2) -> Tensor2:
    """Pairwise squared Euclidean distances between rows."""
    h = as_tensor2(h, "h")
    diff = h[:, None, :] - h[None, :, :]
    return np.einsum("ikc,ikc->ik", diff, diff)


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> Tensor2:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


# --- tape ---

class Var:
    """A value on the tape and the gradient accumulated into it."""

    __slots__ = ("value", "grad")

    def __init__(self, value: np.ndarray, grad: Optional[np.ndarray] = None):
        self.value = value
        self.grad = np.zeros_like(value) if grad is None else grad

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value.reshape(-1)[0])


class Tape:
    """Records ops in order; ``backward`` replays their gradient rules in reverse."""

    def __init__(self):
        self._backward: list[Callable[[], None]] = []

    def constant(self, value) -> Var:
        return Var(as_tensor2(value))

    def param(self, store: ParamStore, name: str) -> Var:
        # shares the store's gradient buffer so accumulation lands there directly
        return Var(store.params[name], store.grads[name])

    def linear(self, x: Var, W: Var, b: Var) -> Var:
        out = Var(linear(x.value, W.value, b.value))

        def backward():
            x.grad += out.grad @ W.value.T
            W.grad += x.value.T @ out.grad
            b.grad += out.grad.sum(axis=0, keepdims=True)

        self._backward.append(backward)
        return out

    def relu(self, x: Var) -> Var:
        out = Var(relu(x.value))

        def backward():
            x.grad += out.grad * (x.value > 0.0)

        self._backward.append(backward)
        return out

    def softmax_rows(self, x: Var) -> Var:
        out = Var(softmax_rows(x.value))

        def backward():
            p, dp = out.value, out.grad
            x.grad += p * (dp - (dp * p).sum(axis=1, keepdims=True))

        self._backward.append(backward)
        return out

    def gather_rows(self, x: Var, rows: Sequence[int]) -> Var:
        """Cross-images selection: backward scatters into the chosen rows only."""
        rows = np.asarray(rows, dtype=np.int64)
        out = Var(x.value[rows])

        def backward():
            np.add.at(x.grad, rows, out.grad)

        self._backward.append(backward)
        return out

    def concat_rows(self, parts: Sequence[Var]) -> Var:
        out = Var(np.concatenate([p.value for p in parts], axis=0))
        bounds = np.cumsum([0] + [p.shape[0] for p in parts])

        def backward():
            for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
                p.grad += out.grad[lo:hi]

        self._backward.append(backward)
        return out

    def sq_dists(self, h: Var) -> Var:
        out = Var(sq_dists(h.value))

        def backward():
            s = out.grad + out.grad.T
            h.grad += 2.0 * (s.sum(axis=1, keepdims=True) * h.value - s @ h.value)

        self._backward.append(backward)
        return out

    def hinge(self, x: Var, margin: float) -> Var:
        """max(0, margin - x) elementwise; subgradient 0 at the kink."""
        out = Var(np.maximum(margin - x.value, 0.0))

        def backward():
            x.grad -= out.grad * (margin - x.value > 0.0)

        self._backward.append(backward)
        return out

    def masked_sum(self, x: Var, mask: np.ndarray) -> Var:
        mask = np.asarray(mask, dtype=np.float64)
        out = Var(np.array([[float((mask * x.value).sum())]]))

        def backward():
            x.grad += mask * out.grad[0, 0]

        self._backward.append(backward)
        return out

    def log_loss(self, p: Var, weights: np.ndarray, floor: float = PROB_FLOOR) -> Var:
        """-Σ weights ∘ log(max(p, floor)); entries below the floor get no gradient."""
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != p.shape:
            raise DimensionError(f"log_loss: weights {weights.shape} vs probabilities {p.shape}")
        clipped = np.maximum(p.value, floor)
        out = Var(np.array([[float(-(weights * np.log(clipped)).sum())]]))

        def backward():
            live = (p.value > floor) & (weights != 0.0)
            p.grad += np.where(live, -weights / clipped, 0.0) * out.grad[0, 0]

        self._backward.append(backward)
        return out

    def weighted_sum(self, terms: Iterable[Tuple[Var, float]]) -> Var:
        terms = list(terms)
        out = Var(np.array([[sum(w * t.item() for t, w in terms)]]))

        def backward():
            for t, w in terms:
                t.grad += w * out.grad

        self._backward.append(backward)
        return out

    def backward(self, out: Var) -> None:
        if out.value.shape != (1, 1):
            raise DimensionError(f"backward needs a scalar output, got {out.value.shape}")
        out.grad += 1.0
        for fn in reversed(self._backward):
            fn()
        self._backward.clear()


# --- optimisation ---

def sgd_step(params: ParamStore, lr: float) -> ParamStore:
    """p <- p - lr * grad for every parameter, then zero the gradients."""
    for name, g in params.grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r}", param=name)
    for name, p in params.params.items():
        p -= lr * params.grads[name]
    params.zero_grad()
    params.step += 1
    return params


def relative_error(analytic: np.ndarray, numeric: np.ndarray, atol: float = GRAD_ATOL) -> float:
    """Relative L2 error; absolute error when both gradients are below ``atol``."""
    num = float(np.linalg.norm(analytic - numeric))
    scale = float(np.linalg.norm(analytic) + np.linalg.norm(numeric))
    if scale < atol:
        return num
    return num / scale


def grad_check(
    loss_fn: Callable[[ParamStore], float],
    params: ParamStore,
    eps: float = 1e-5,
    tol: float = 1e-4,
    names: Optional[Iterable[str]] = None,
) -> GradCheckReport:
    """Compare analytic gradients with central differences.

    ``loss_fn`` must run forward and backward (accumulating into ``params.grads``) and return
    the scalar loss; any discrete choices it makes have to be frozen by the caller.
    """
    params.zero_grad()
    loss_fn(params)
    analytic = {k: g.copy() for k, g in params.grads.items()}
    errors = {}
    for name in names if names is not None else list(params.params):
        value = params.params[name]
        numeric = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + eps
            plus = loss_fn(params)
            value[idx] = orig - eps
            minus = loss_fn(params)
            value[idx] = orig
            numeric[idx] = (plus - minus) / (2.0 * eps)
        errors[name] = relative_error(analytic[name], numeric)
    params.zero_grad()
    return GradCheckReport(errors=errors, tol=tol)
