"""
Coarse similarity mining: a 2-way seen/novel head on both streams, the cross-images
selection layer over the unlabeled batch, and the coarse loss.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..exceptions import ConfigurationError, DimensionError
from ..models.params import ParamStore
from ..utils import diffcore
from ..utils.diffcore import Tape, Var

logger = logging.getLogger(__name__)

W_NAME, B_NAME = "coarse.W", "coarse.b"
SEEN_COL, NOVEL_COL = 0, 1


@dataclass(frozen=True)
class CoarseScores:
    """Row-softmax probabilities; column 0 = P(seen), column 1 = P(novel)."""

    c_u: np.ndarray
    c_s: np.ndarray


@dataclass(frozen=True)
class CoarseSelection:
    """One unlabeled row index per contiguous group of ``group_size`` rows."""

    indices: np.ndarray
    group_size: int

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=np.int64)
        lo = np.arange(indices.size) * self.group_size
        if np.any(indices < lo) or np.any(indices >= lo + self.group_size):
            raise ConfigurationError("selected index outside its group")
        object.__setattr__(self, "indices", indices)

    @property
    def m(self) -> int:
        return int(self.indices.size)


class LossWithGrads(NamedTuple):
    loss: float
    grads: tuple


def init_coarse_head(params: ParamStore, d_f: int, rng: np.random.Generator) -> None:
    params.add(W_NAME, diffcore.xavier_uniform(rng, d_f, 2))
    params.add(B_NAME, np.zeros((1, 2)))


def score(f_u: np.ndarray, f_s: np.ndarray, params: ParamStore) -> CoarseScores:
    W, b = params[W_NAME], params[B_NAME]
    return CoarseScores(
        c_u=diffcore.softmax_rows(diffcore.linear(f_u, W, b)),
        c_s=diffcore.softmax_rows(diffcore.linear(f_s, W, b)),
    )


def score_on_tape(tape: Tape, f: Var, params: ParamStore) -> Var:
    W, b = tape.param(params, W_NAME), tape.param(params, B_NAME)
    return tape.softmax_rows(tape.linear(f, W, b))


def select(scores: CoarseScores, m: int) -> CoarseSelection:
    """Greedy per-group argmax of P(novel); ties go to the lowest row index."""
    r_u = scores.c_u.shape[0]
    if m < 1 or r_u % m != 0:
        raise ConfigurationError(f"unlabeled batch of {r_u} rows cannot be split into {m} equal groups")
    group_size = r_u // m
    novel = scores.c_u[:, NOVEL_COL].reshape(m, group_size)
    # np.argmax returns the first maximum
    indices = novel.argmax(axis=1) + np.arange(m) * group_size
    return CoarseSelection(indices, group_size)


def _targets(n_u: int, n_s: int, selection: CoarseSelection) -> tuple[np.ndarray, np.ndarray]:
    w_u = np.zeros((n_u, 2))
    np.add.at(w_u, (selection.indices, NOVEL_COL), 1.0 / selection.m)
    w_s = np.zeros((n_s, 2))
    w_s[:, SEEN_COL] = 1.0 / n_s
    return w_u, w_s


def coarse_loss_on_tape(tape: Tape, c_u: Var, c_s: Var, selection: CoarseSelection) -> Var:
    """-(1/m) Σ_i log c_u[j_i, novel] - (1/r_s) Σ_i log c_s[i, seen].

    Unselected unlabeled rows carry zero weight, so backward leaves them exactly zero.
    """
    if selection.m * selection.group_size != c_u.shape[0]:
        raise DimensionError(f"selection covers {selection.m * selection.group_size} rows, batch has {c_u.shape[0]}")
    w_u, w_s = _targets(c_u.shape[0], c_s.shape[0], selection)
    return tape.weighted_sum([(tape.log_loss(c_u, w_u), 1.0), (tape.log_loss(c_s, w_s), 1.0)])


def coarse_loss(scores: CoarseScores, selection: CoarseSelection) -> LossWithGrads:
    """Loss value plus gradients w.r.t. (c_u, c_s)."""
    tape = Tape()
    c_u, c_s = tape.constant(scores.c_u), tape.constant(scores.c_s)
    out = coarse_loss_on_tape(tape, c_u, c_s, selection)
    tape.backward(out)
    return LossWithGrads(out.item(), (c_u.grad, c_s.grad))
