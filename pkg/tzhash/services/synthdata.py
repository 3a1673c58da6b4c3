"""
Synthetic zero-shot benchmark and the on-disk dataset layout.

Directory layout written by ``write_dataset``::

    source.feat        labelled seen-class rows
    unlabeled.feat     mixed seen/novel rows, every label ``?``
    vocab.txt          class vocabulary
    eval/queries.feat  novel-class queries
    eval/database.feat source + unlabeled rows with true labels
    eval/unlabeled_truth.txt

Training reads only the top-level files. Hidden labels of the unlabeled rows live in
``EvaluationOracle`` and the ``eval/`` files.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..exceptions import DataError
from ..models.batch import FeatureBatch, load_features, write_features
from ..models.vocabulary import ClassVocabulary, load_vocabulary, write_vocabulary
from ..schemas.config import SynthSpec

logger = logging.getLogger(__name__)

SOURCE_FILE = "source.feat"
UNLABELED_FILE = "unlabeled.feat"
VOCAB_FILE = "vocab.txt"
EVAL_DIR = "eval"
QUERIES_FILE = "queries.feat"
DATABASE_FILE = "database.feat"
TRUTH_FILE = "unlabeled_truth.txt"


class EvaluationOracle:
    """Ground truth of the unlabeled set; used for measurement only."""

    def __init__(self, truth: np.ndarray, novel_ids: np.ndarray):
        self._truth = np.asarray(truth, dtype=np.int64)
        self._novel = np.asarray(novel_ids, dtype=np.int64)

    def __len__(self) -> int:
        return self._truth.size

    def novel_fraction(self, rows: np.ndarray) -> float:
        """Fraction of the given unlabeled-set rows whose true class is novel."""
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size == 0:
            return 0.0
        return float(np.isin(self._truth[rows], self._novel).mean())

    def labeled_view(self, unlabeled: FeatureBatch) -> FeatureBatch:
        return FeatureBatch.source(unlabeled.features, self._truth)


@dataclass(frozen=True)
class TrainingData:
    source: FeatureBatch
    unlabeled: FeatureBatch
    vocab: ClassVocabulary


@dataclass(frozen=True)
class EvaluationData:
    queries: FeatureBatch
    database: FeatureBatch
    oracle: Optional[EvaluationOracle] = None


@dataclass(frozen=True)
class SynthDataset:
    training: TrainingData
    evaluation: EvaluationData

    @property
    def source(self) -> FeatureBatch:
        return self.training.source

    @property
    def unlabeled(self) -> FeatureBatch:
        return self.training.unlabeled

    @property
    def vocab(self) -> ClassVocabulary:
        return self.training.vocab

    @property
    def queries(self) -> FeatureBatch:
        return self.evaluation.queries

    @property
    def database(self) -> FeatureBatch:
        return self.evaluation.database


def _word_vectors(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal seen vectors; novel k = ρ_k·seen[pair_k] + √(1−ρ_k²)·(fresh orthonormal direction)."""
    n_total = spec.n_seen + spec.n_novel
    basis, _ = np.linalg.qr(rng.standard_normal((spec.word_dim, n_total)))
    vectors = np.empty((n_total, spec.word_dim))
    vectors[: spec.n_seen] = basis[:, : spec.n_seen].T
    for k, (rho, pair) in enumerate(zip(spec.rho, spec.pairing)):
        vectors[spec.n_seen + k] = rho * basis[:, pair] + np.sqrt(1.0 - rho * rho) * basis[:, spec.n_seen + k]
    return vectors


def _class_means(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    seen = spec.sigma_between * rng.standard_normal((spec.n_seen, spec.d_in))
    fresh = spec.sigma_between * rng.standard_normal((spec.n_novel, spec.d_in))
    novel = np.empty_like(fresh)
    for k, (rho, pair) in enumerate(zip(spec.rho, spec.pairing)):
        alpha = spec.feature_alignment * rho
        novel[k] = alpha * seen[pair] + (1.0 - alpha) * fresh[k]
    return np.concatenate([seen, novel], axis=0)


def _draw(labels: np.ndarray, means: np.ndarray, sigma: float, rng: np.random.Generator):
    labels = rng.permutation(labels)
    features = means[labels] + sigma * rng.standard_normal((labels.size, means.shape[1]))
    return features, labels


def generate(spec: SynthSpec) -> SynthDataset:
    """Deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    vectors = _word_vectors(spec, rng)
    means = _class_means(spec, rng)
    seen_ids = np.arange(spec.n_seen)
    novel_ids = np.arange(spec.n_seen, spec.n_seen + spec.n_novel)

    vocab = ClassVocabulary(
        names=[f"seen_{i}" for i in range(spec.n_seen)] + [f"novel_{k}" for k in range(spec.n_novel)],
        vectors=vectors,
        novel_mask=np.arange(spec.n_seen + spec.n_novel) >= spec.n_seen,
    )

    src_x, src_y = _draw(np.resize(seen_ids, spec.n_source), means, spec.sigma_within, rng)

    n_novel_u = int(round(spec.n_unlabeled * spec.unlabeled_novel_fraction))
    unl_labels = np.concatenate([
        np.resize(novel_ids, n_novel_u),
        np.resize(seen_ids, spec.n_unlabeled - n_novel_u),
    ])
    unl_x, unl_y = _draw(unl_labels, means, spec.sigma_within, rng)

    q_x, q_y = _draw(np.resize(novel_ids, spec.n_queries), means, spec.sigma_within, rng)

    source = FeatureBatch.source(src_x, src_y)
    unlabeled = FeatureBatch.unlabeled(unl_x)
    database = FeatureBatch.source(np.concatenate([src_x, unl_x]), np.concatenate([src_y, unl_y]))
    logger.info(
        f"generated {spec.n_source} source, {spec.n_unlabeled} unlabeled ({n_novel_u} novel), "
        f"{spec.n_queries} query rows over {spec.n_seen}+{spec.n_novel} classes"
    )
    return SynthDataset(
        training=TrainingData(source, unlabeled, vocab),
        evaluation=EvaluationData(FeatureBatch.source(q_x, q_y), database, EvaluationOracle(unl_y, novel_ids)),
    )


def write_dataset(dataset: SynthDataset, out_dir: str | Path, oracle_truth: bool = True) -> Path:
    out = Path(out_dir)
    (out / EVAL_DIR).mkdir(parents=True, exist_ok=True)
    write_features(out / SOURCE_FILE, dataset.source)
    write_features(out / UNLABELED_FILE, dataset.unlabeled)
    write_vocabulary(out / VOCAB_FILE, dataset.vocab)
    write_features(out / EVAL_DIR / QUERIES_FILE, dataset.queries)
    write_features(out / EVAL_DIR / DATABASE_FILE, dataset.database)
    oracle = dataset.evaluation.oracle
    if oracle_truth and oracle is not None:
        truth = oracle.labeled_view(dataset.unlabeled).labels
        (out / EVAL_DIR / TRUTH_FILE).write_text("\n".join(str(int(v)) for v in truth) + "\n", encoding="utf-8")
    return out


def load_training_data(data_dir: str | Path) -> TrainingData:
    data_dir = Path(data_dir)
    source = load_features(data_dir / SOURCE_FILE)
    unlabeled = load_features(data_dir / UNLABELED_FILE)
    vocab = load_vocabulary(data_dir / VOCAB_FILE)
    if source.labels is None:
        raise DataError(f"{data_dir / SOURCE_FILE}: source rows must all be labelled")
    if unlabeled.labels is not None:
        raise DataError(f"{data_dir / UNLABELED_FILE}: unlabeled rows must all be `?`")
    if source.width != unlabeled.width:
        raise DataError(f"source width {source.width} differs from unlabeled width {unlabeled.width}")
    return TrainingData(source, unlabeled, vocab)


def load_evaluation_data(data_dir: str | Path, vocab: Optional[ClassVocabulary] = None) -> Optional[EvaluationData]:
    """Returns None when the dataset carries no ``eval/`` split."""
    eval_dir = Path(data_dir) / EVAL_DIR
    if not (eval_dir / QUERIES_FILE).is_file() or not (eval_dir / DATABASE_FILE).is_file():
        return None
    queries = load_features(eval_dir / QUERIES_FILE)
    database = load_features(eval_dir / DATABASE_FILE)
    oracle = None
    truth_path = eval_dir / TRUTH_FILE
    if vocab is not None and truth_path.is_file():
        truth = np.array([int(v) for v in truth_path.read_text(encoding="utf-8").split()], dtype=np.int64)
        oracle = EvaluationOracle(truth, vocab.novel_ids)
    return EvaluationData(queries, database, oracle)
