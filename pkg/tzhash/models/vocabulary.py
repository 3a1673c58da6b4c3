"""
Class vocabulary: class names, their word vectors and the seen/novel partition.

File format, one class per line: ``<name> <seen|novel> <v1> ... <vD>``.
Class ids are 0-based line numbers.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np

from ..exceptions import DataError, ParseError, VocabularyError

SEEN = "seen"
NOVEL = "novel"


@dataclass(frozen=True)
class ClassVocabulary:
    names: List[str]
    vectors: np.ndarray
    novel_mask: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        mask = np.asarray(self.novel_mask, dtype=bool)
        if vectors.ndim != 2 or vectors.shape[0] != len(self.names) or mask.shape != (len(self.names),):
            raise VocabularyError("one word vector and one partition flag per class required")
        if len(set(self.names)) != len(self.names):
            raise VocabularyError("class names must be unique; seen and novel sets must be disjoint")
        if not np.all(np.isfinite(vectors)):
            raise VocabularyError("word vectors contain non-finite values")
        zero = np.flatnonzero(np.linalg.norm(vectors, axis=1) == 0.0)
        if zero.size:
            raise VocabularyError(f"zero-norm word vector for class {self.names[zero[0]]!r}")
        if not mask.any():
            raise VocabularyError("vocabulary has no novel classes")
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "novel_mask", mask)

    def __len__(self) -> int:
        return len(self.names)

    @property
    def seen_ids(self) -> np.ndarray:
        return np.flatnonzero(~self.novel_mask)

    @property
    def novel_ids(self) -> np.ndarray:
        return np.flatnonzero(self.novel_mask)

    @property
    def n_novel(self) -> int:
        return int(self.novel_mask.sum())

    def is_seen(self, class_id: int) -> bool:
        return 0 <= class_id < len(self.names) and not self.novel_mask[class_id]


def load_vocabulary(path: str | Path) -> ClassVocabulary:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"vocabulary file not found: {path}")
    names: list[str] = []
    flags: list[bool] = []
    rows: list[list[float]] = []
    dim = None
    with path.open("r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 3:
                raise ParseError(str(path), line_no, "expected `<name> <seen|novel> <v1> ...`")
            name, kind, values = parts[0], parts[1], parts[2:]
            if kind not in (SEEN, NOVEL):
                raise ParseError(str(path), line_no, f"partition must be seen or novel, got {kind!r}")
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise ParseError(str(path), line_no, f"expected {dim} vector values, got {len(values)}")
            try:
                rows.append([float(v) for v in values])
            except ValueError as e:
                raise ParseError(str(path), line_no, str(e))
            names.append(name)
            flags.append(kind == NOVEL)
    if not names:
        raise ParseError(str(path), 1, "empty vocabulary")
    return ClassVocabulary(names, np.array(rows), np.array(flags))


def write_vocabulary(path: str | Path, vocab: ClassVocabulary) -> None:
    lines = []
    for name, vec, novel in zip(vocab.names, vocab.vectors, vocab.novel_mask):
        kind = NOVEL if novel else SEEN
        lines.append(" ".join([name, kind, *(repr(v) for v in vec.tolist())]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
