"""
Similarity-preserving hash head: pair labels over source rows and the fine-assigned
target rows, and the contrastive loss on the relaxed (real-valued) codes.
"""

import logging
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..exceptions import ConfigurationError, DimensionError
from ..models.params import ParamStore
from ..utils import diffcore
from ..utils.diffcore import Tape, Var
from .coarse_miner import LossWithGrads
from .retrieval import binarize, hamming_matrix

logger = logging.getLogger(__name__)

W_NAME, B_NAME = "hash.W", "hash.b"


class PairLabel(IntEnum):
    EXCLUDED = -1
    DISSIMILAR = 0
    SIMILAR = 1


@dataclass(frozen=True)
class HashBatch:
    """Relaxed codes for r_s source rows followed by the target rows.

    ``classes`` holds the source label for source rows and, for target rows, the class with
    the largest fine-head probability.
    """

    h: np.ndarray
    is_target: np.ndarray
    classes: np.ndarray

    def __post_init__(self):
        h = diffcore.as_tensor2(self.h, "h")
        is_target = np.asarray(self.is_target, dtype=bool)
        classes = np.asarray(self.classes, dtype=np.int64)
        if is_target.shape != (h.shape[0],) or classes.shape != (h.shape[0],):
            raise DimensionError("one origin flag and one class per code row required")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "is_target", is_target)
        object.__setattr__(self, "classes", classes)

    def __len__(self) -> int:
        return self.h.shape[0]

    @property
    def n_bits(self) -> int:
        return self.h.shape[1]


def init_hash_head(params: ParamStore, d_f: int, n_bits: int, rng: np.random.Generator) -> None:
    params.add(W_NAME, diffcore.xavier_uniform(rng, d_f, n_bits))
    params.add(B_NAME, np.zeros((1, n_bits)))


def codes_on_tape(tape: Tape, f: Var, params: ParamStore) -> Var:
    return tape.linear(f, tape.param(params, W_NAME), tape.param(params, B_NAME))


def relaxed_codes(f: np.ndarray, params: ParamStore) -> np.ndarray:
    return diffcore.linear(f, params[W_NAME], params[B_NAME])


def pair_labels(batch: HashBatch, tau_sim: int, tau_dis: int) -> np.ndarray:
    """Symmetric int8 matrix of PairLabel values.

    source/source: similar iff same class. source/target: always dissimilar.
    target/target: similar if same class and Hamming <= tau_sim, dissimilar if classes
    differ and Hamming >= tau_dis, otherwise excluded. The diagonal is excluded.
    """
    if not 0 <= tau_sim <= tau_dis <= batch.n_bits:
        raise DimensionError(f"need 0 <= tau_sim <= tau_dis <= {batch.n_bits}")
    codes = binarize(batch.h)
    ham = hamming_matrix(codes, codes)
    same = batch.classes[:, None] == batch.classes[None, :]
    tgt = batch.is_target
    both_src = ~tgt[:, None] & ~tgt[None, :]
    both_tgt = tgt[:, None] & tgt[None, :]

    labels = np.full(ham.shape, PairLabel.DISSIMILAR, dtype=np.int8)
    labels[both_src & same] = PairLabel.SIMILAR
    labels[both_tgt] = PairLabel.EXCLUDED
    labels[both_tgt & same & (ham <= tau_sim)] = PairLabel.SIMILAR
    labels[both_tgt & ~same & (ham >= tau_dis)] = PairLabel.DISSIMILAR
    np.fill_diagonal(labels, PairLabel.EXCLUDED)
    return labels


def contrastive_on_tape(tape: Tape, h: Var, labels: np.ndarray, eps: float, normalize: bool = True) -> Var:
    """Σ_ik s‖h_i−h_k‖² + (1−s)·max(0, ε−‖h_i−h_k‖²) over ordered non-excluded pairs."""
    if labels.shape != (h.shape[0], h.shape[0]):
        raise DimensionError(f"pair labels {labels.shape} for {h.shape[0]} codes")
    if eps <= 0:
        raise ConfigurationError("margin must be positive")
    sim = labels == PairLabel.SIMILAR
    dis = labels == PairLabel.DISSIMILAR
    count = int(sim.sum() + dis.sum())
    scale = 1.0 / count if normalize and count else 1.0
    d = tape.sq_dists(h)
    return tape.weighted_sum([
        (tape.masked_sum(d, sim), scale),
        (tape.masked_sum(tape.hinge(d, eps), dis), scale),
    ])


def contrastive_loss(batch: HashBatch, labels: np.ndarray, eps: float, normalize: bool = True) -> LossWithGrads:
    """Loss value plus the gradient w.r.t. h."""
    tape = Tape()
    h = tape.constant(batch.h)
    out = contrastive_on_tape(tape, h, labels, eps, normalize)
    tape.backward(out)
    return LossWithGrads(out.item(), (h.grad,))
