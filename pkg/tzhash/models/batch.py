"""
Feature batches and the plain-text feature file format.

File layout: a header line ``d_in n`` followed by n lines ``<label|?> v1 .. v_d``.
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from ..exceptions import DataError, DimensionError, ParseError

UNLABELED_MARK = "?"


class Stream(str, Enum):
    SOURCE = "source"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class FeatureBatch:
    """Rows of input features; source rows are labelled, unlabeled rows never are."""

    features: np.ndarray
    labels: Optional[np.ndarray]
    stream: Stream

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2:
            raise DimensionError(f"features must be 2-D, got shape {features.shape}")
        if not np.all(np.isfinite(features)):
            raise DataError("features contain non-finite values")
        object.__setattr__(self, "features", features)
        if self.stream is Stream.SOURCE:
            if self.labels is None:
                raise DataError("source batches need a label for every row")
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (features.shape[0],):
                raise DimensionError(f"{labels.shape[0]} labels for {features.shape[0]} rows")
            if np.any(labels < 0):
                raise DataError("source labels must be non-negative class ids")
            object.__setattr__(self, "labels", labels)
        elif self.labels is not None:
            raise DataError("unlabeled batches cannot carry labels")

    @classmethod
    def source(cls, features, labels) -> "FeatureBatch":
        return cls(features, np.asarray(labels), Stream.SOURCE)

    @classmethod
    def unlabeled(cls, features) -> "FeatureBatch":
        return cls(features, None, Stream.UNLABELED)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def width(self) -> int:
        return self.features.shape[1]

    def take(self, rows: np.ndarray) -> "FeatureBatch":
        labels = None if self.labels is None else self.labels[rows]
        return FeatureBatch(self.features[rows], labels, self.stream)


def load_features(path: str | Path) -> FeatureBatch:
    """Parse a feature file; all-``?`` files load as unlabeled, fully labelled ones as source."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"feature file not found: {path}")
    src = str(path)
    with path.open("r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ParseError(src, 1, "missing header `d_in n`")
    header = lines[0].split()
    try:
        d_in, n = (int(v) for v in header)
    except ValueError:
        raise ParseError(src, 1, f"header must be `d_in n`, got {lines[0]!r}")
    body = [(no, line) for no, line in enumerate(lines[1:], start=2) if line.strip()]
    if len(body) != n:
        raise ParseError(src, len(lines), f"header declares {n} rows, found {len(body)}")

    features = np.empty((n, d_in), dtype=np.float64)
    labels: list[Optional[int]] = []
    for row, (line_no, line) in enumerate(body):
        parts = line.split()
        if len(parts) != d_in + 1:
            raise ParseError(src, line_no, f"expected label and {d_in} values, got {len(parts) - 1} values")
        tag = parts[0]
        if tag == UNLABELED_MARK:
            labels.append(None)
        else:
            try:
                labels.append(int(tag))
            except ValueError:
                raise ParseError(src, line_no, f"bad label {tag!r}")
        try:
            features[row] = [float(v) for v in parts[1:]]
        except ValueError as e:
            raise ParseError(src, line_no, str(e))

    missing = sum(lbl is None for lbl in labels)
    if missing == 0:
        return FeatureBatch.source(features, np.array(labels, dtype=np.int64))
    if missing == n:
        return FeatureBatch.unlabeled(features)
    raise ParseError(src, 2, "file mixes labelled and unlabeled rows")


def write_features(path: str | Path, batch: FeatureBatch) -> None:
    n, d = batch.features.shape
    lines = [f"{d} {n}"]
    for i in range(n):
        tag = UNLABELED_MARK if batch.labels is None else str(int(batch.labels[i]))
        lines.append(" ".join([tag, *(repr(v) for v in batch.features[i].tolist())]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
