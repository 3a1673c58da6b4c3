"""
Fine similarity mining: an n_y-way head over the coarse-selected images and the source
batch. Source images are supervised with word-vector soft labels, and one selected image
is greedily assigned to each novel class.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..exceptions import DataError, DimensionError, VocabularyError
from ..models.params import ParamStore
from ..models.vocabulary import ClassVocabulary
from ..utils import diffcore
from ..utils.diffcore import Tape, Var
from .coarse_miner import LossWithGrads

logger = logging.getLogger(__name__)

W_NAME, B_NAME = "fine.W", "fine.b"


@dataclass(frozen=True)
class FineAssignment:
    """indices[k] is the row (among the m coarse-selected images) assigned to novel class k."""

    indices: np.ndarray
    soft_labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))


def init_fine_head(params: ParamStore, d_f: int, n_y: int, rng: np.random.Generator) -> None:
    params.add(W_NAME, diffcore.xavier_uniform(rng, d_f, n_y))
    params.add(B_NAME, np.zeros((1, n_y)))


def cosine_sim(z_i: np.ndarray, z_j: np.ndarray) -> float:
    z_i, z_j = np.asarray(z_i, dtype=np.float64), np.asarray(z_j, dtype=np.float64)
    if z_i.shape != z_j.shape:
        raise DimensionError(f"word vectors of shapes {z_i.shape} and {z_j.shape}")
    n_i, n_j = np.linalg.norm(z_i), np.linalg.norm(z_j)
    if n_i == 0.0 or n_j == 0.0:
        raise VocabularyError("cosine similarity of a zero-norm word vector")
    return float(np.clip(z_i @ z_j / (n_i * n_j), -1.0, 1.0))


class SoftLabelTable:
    """Normalised seen→novel similarity rows, computed once per vocabulary.

    Negative cosines are clamped to 0 before normalising; a row with no positive
    similarity falls back to uniform.
    """

    def __init__(self, vocab: ClassVocabulary):
        self.vocab = vocab
        novel = vocab.novel_ids
        self.rows = np.full((len(vocab), novel.size), np.nan)
        fallback = []
        for c in vocab.seen_ids:
            sims = np.array([cosine_sim(vocab.vectors[c], vocab.vectors[k]) for k in novel])
            sims = np.maximum(sims, 0.0)
            total = sims.sum()
            if total > 0.0:
                self.rows[c] = sims / total
            else:
                fallback.append(vocab.names[c])
                self.rows[c] = 1.0 / novel.size
        if fallback:
            logger.warning(
                f"{len(fallback)} of {vocab.seen_ids.size} seen classes have no positive similarity to any "
                f"novel class; using uniform soft labels for {fallback}"
            )

    @property
    def n_novel(self) -> int:
        return self.rows.shape[1]

    def __call__(self, source_labels: np.ndarray) -> np.ndarray:
        labels = np.asarray(source_labels, dtype=np.int64)
        bad = [int(c) for c in labels if not self.vocab.is_seen(int(c))]
        if bad:
            raise DataError(f"source labels are not seen classes of the vocabulary: {sorted(set(bad))}")
        return self.rows[labels]


def soft_labels(source_labels: np.ndarray, vocab: ClassVocabulary) -> np.ndarray:
    return SoftLabelTable(vocab)(source_labels)


def assign(p_u: np.ndarray) -> np.ndarray:
    """Independent per-class argmax over rows; lowest row wins ties, rows may repeat."""
    p_u = diffcore.as_tensor2(p_u, "p_u")
    return p_u.argmax(axis=0).astype(np.int64)


def score_on_tape(tape: Tape, f: Var, params: ParamStore) -> Var:
    W, b = tape.param(params, W_NAME), tape.param(params, B_NAME)
    return tape.softmax_rows(tape.linear(f, W, b))


def fine_loss_on_tape(
    tape: Tape,
    p_s: Var,
    p_u: Var,
    indices: np.ndarray,
    soft: np.ndarray,
    include_targets: bool = True,
) -> Var:
    """-(1/r_s) ΣΣ soft ∘ log p_s  -  (1/n_y) Σ_k log p_u[j_k, k].

    Only the assigned rows of p_u receive gradient.
    """
    r_s, n_y = p_s.shape
    if soft.shape != (r_s, n_y):
        raise DimensionError(f"soft labels {soft.shape} vs source probabilities {p_s.shape}")
    terms = [(tape.log_loss(p_s, soft / r_s), 1.0)]
    if include_targets:
        indices = np.asarray(indices, dtype=np.int64)
        if indices.shape != (p_u.shape[1],):
            raise DimensionError(f"{indices.size} assignments for {p_u.shape[1]} novel classes")
        w_u = np.zeros(p_u.shape)
        np.add.at(w_u, (indices, np.arange(n_y)), 1.0 / n_y)
        terms.append((tape.log_loss(p_u, w_u), 1.0))
    return tape.weighted_sum(terms)


def fine_loss(p_s: np.ndarray, p_u: np.ndarray, assignment: FineAssignment) -> LossWithGrads:
    """Loss value plus gradients w.r.t. (p_s, p_u)."""
    tape = Tape()
    vs, vu = tape.constant(p_s), tape.constant(p_u)
    out = fine_loss_on_tape(tape, vs, vu, assignment.indices, assignment.soft_labels)
    tape.backward(out)
    return LossWithGrads(out.item(), (vs.grad, vu.grad))
