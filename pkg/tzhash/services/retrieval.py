"""
Binarization, packed Hamming search and retrieval metrics.
"""

import logging
from typing import Iterator, List, Optional, Tuple

import numpy as np

from ..exceptions import DataError, DimensionError
from ..models.code_index import UNKNOWN_LABEL, CodeIndex
from ..schemas.metrics import MetricLine

logger = logging.getLogger(__name__)

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint16)
_QUERY_CHUNK = 256


def binarize(h: np.ndarray, labels: Optional[np.ndarray] = None) -> CodeIndex:
    """bit = 1 where h >= 0 (so sign(0) counts as +1)."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2:
        raise DimensionError(f"codes must be 2-D, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise DataError("cannot binarize non-finite values")
    return CodeIndex.from_bits((h >= 0.0).astype(np.uint8), labels)


def hamming(a, b) -> int:
    """Hamming distance between two 0/1 sequences of equal length."""
    a, b = np.asarray(a, dtype=np.uint8).ravel(), np.asarray(b, dtype=np.uint8).ravel()
    if a.size != b.size:
        raise DimensionError(f"codes of length {a.size} and {b.size}")
    return int(_POPCOUNT[np.bitwise_xor(np.packbits(a), np.packbits(b))].sum())


def hamming_matrix(queries: CodeIndex, db: CodeIndex) -> np.ndarray:
    """(n_queries × n_db) distances: popcount of XOR over the packed bytes."""
    if queries.n_bits != db.n_bits:
        raise DimensionError(f"query codes have {queries.n_bits} bits, database {db.n_bits}")
    out = np.empty((len(queries), len(db)), dtype=np.int64)
    for lo, hi in _chunks(len(queries)):
        xor = np.bitwise_xor(queries.packed[lo:hi, None, :], db.packed[None, :, :])
        out[lo:hi] = _POPCOUNT[xor].sum(axis=2)
    return out


def _chunks(n: int) -> Iterator[Tuple[int, int]]:
    for lo in range(0, n, _QUERY_CHUNK):
        yield lo, min(lo + _QUERY_CHUNK, n)


def rank(distances: np.ndarray) -> np.ndarray:
    """Ascending distance, ties broken by database index."""
    return np.argsort(distances, axis=-1, kind="stable")


def mean_average_precision(queries: CodeIndex, db: CodeIndex) -> float:
    """MAP over the full Hamming ranking; relevance = same label."""
    if len(db) == 0:
        raise DataError("empty database")
    dist = hamming_matrix(queries, db)
    aps: List[float] = []
    skipped = 0
    for qi in range(len(queries)):
        q_label = queries.labels[qi]
        relevant = (db.labels[rank(dist[qi])] == q_label) & (q_label != UNKNOWN_LABEL)
        hits = int(relevant.sum())
        if hits == 0:
            skipped += 1
            continue
        positions = np.flatnonzero(relevant) + 1
        aps.append(float(np.mean(np.arange(1, hits + 1) / positions)))
    if skipped:
        logger.warning(f"{skipped} of {len(queries)} queries have no relevant database item; excluded from MAP")
    if not aps:
        return 0.0
    return float(np.mean(aps))


def precision_at_radius(queries: CodeIndex, db: CodeIndex, radius: int = 2) -> float:
    """Mean over queries of precision inside the Hamming ball; an empty ball scores 0."""
    if len(db) == 0:
        raise DataError("empty database")
    dist = hamming_matrix(queries, db)
    ball = dist <= radius
    relevant = (db.labels[None, :] == queries.labels[:, None]) & (queries.labels[:, None] != UNKNOWN_LABEL)
    retrieved = ball.sum(axis=1)
    hits = (ball & relevant).sum(axis=1)
    per_query = np.divide(hits, retrieved, out=np.zeros(len(queries)), where=retrieved > 0)
    return float(per_query.mean()) if len(queries) else 0.0


def search(
    queries: CodeIndex, db: CodeIndex, top_k: int, radius: Optional[int] = None
) -> List[List[Tuple[int, int]]]:
    """Per query, up to ``top_k`` (db index, distance) pairs in ranking order."""
    dist = hamming_matrix(queries, db)
    results = []
    for qi in range(len(queries)):
        order = rank(dist[qi])
        if radius is not None:
            order = order[dist[qi][order] <= radius]
        results.append([(int(j), int(dist[qi, j])) for j in order[:top_k]])
    return results


def evaluate(queries: CodeIndex, db: CodeIndex, radius: int = 2) -> List[MetricLine]:
    return [
        MetricLine(metric="map", bits=queries.n_bits, value=mean_average_precision(queries, db)),
        MetricLine(metric=f"precision@{radius}", bits=queries.n_bits, value=precision_at_radius(queries, db, radius)),
    ]
