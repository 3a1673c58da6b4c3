"""
Packed binary codes with their labels.

Codes export format, one item per line: ``<label> <bitstring>`` (``?`` for unknown labels).
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import DataError, DimensionError, ParseError

UNKNOWN_LABEL = -1


@dataclass(frozen=True)
class CodeIndex:
    """Immutable N×l bit matrix stored packed (numpy packbits, big-endian bit order)."""

    packed: np.ndarray
    n_bits: int
    labels: np.ndarray

    def __post_init__(self):
        packed = np.ascontiguousarray(self.packed, dtype=np.uint8)
        if packed.ndim != 2 or packed.shape[1] != (self.n_bits + 7) // 8:
            raise DimensionError(f"packed codes of shape {packed.shape} do not hold {self.n_bits} bits")
        labels = np.array(self.labels, dtype=np.int64)
        if labels.shape != (packed.shape[0],):
            raise DimensionError(f"{labels.shape[0]} labels for {packed.shape[0]} codes")
        packed.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "packed", packed)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_bits(cls, bits: np.ndarray, labels=None) -> "CodeIndex":
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim != 2:
            raise DimensionError(f"bits must be 2-D, got shape {bits.shape}")
        if labels is None:
            labels = np.full(bits.shape[0], UNKNOWN_LABEL, dtype=np.int64)
        return cls(np.packbits(bits, axis=1), bits.shape[1], labels)

    def __len__(self) -> int:
        return self.packed.shape[0]

    def bits(self) -> np.ndarray:
        return np.unpackbits(self.packed, axis=1, count=self.n_bits)

    def bitstrings(self) -> list[str]:
        return ["".join("1" if b else "0" for b in row) for row in self.bits()]

    def take(self, rows) -> "CodeIndex":
        return CodeIndex(self.packed[rows], self.n_bits, self.labels[rows])


def parse_bitstring(text: str) -> np.ndarray:
    if not text or any(c not in "01" for c in text):
        raise ValueError(f"not a bitstring: {text!r}")
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


def load_codes(path: str | Path) -> CodeIndex:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"codes file not found: {path}")
    labels, rows = [], []
    n_bits = None
    with path.open("r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ParseError(str(path), line_no, "expected `<label> <bitstring>`")
            tag, text = parts
            try:
                bits = parse_bitstring(text)
                labels.append(UNKNOWN_LABEL if tag == "?" else int(tag))
            except ValueError as e:
                raise ParseError(str(path), line_no, str(e))
            if n_bits is None:
                n_bits = bits.size
            elif bits.size != n_bits:
                raise ParseError(str(path), line_no, f"expected {n_bits} bits, got {bits.size}")
            rows.append(bits)
    if not rows:
        raise DataError(f"codes file is empty: {path}")
    return CodeIndex.from_bits(np.stack(rows), np.array(labels, dtype=np.int64))


def write_codes(path: str | Path, index: CodeIndex) -> None:
    lines = [
        f"{'?' if label == UNKNOWN_LABEL else int(label)} {code}"
        for label, code in zip(index.labels, index.bitstrings())
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
