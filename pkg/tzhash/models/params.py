"""
Trainable parameters with paired gradient buffers, and the binary checkpoint format.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, Tuple

import numpy as np

from ..exceptions import DataError, DimensionError

MAGIC = b"TZSH"
VERSION = 1


@dataclass
class ParamStore:
    """Named float64 matrices (biases are 1×k) with same-shape gradient buffers."""

    params: Dict[str, np.ndarray] = field(default_factory=dict)
    grads: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    epoch: int = 0

    def add(self, name: str, value: np.ndarray) -> None:
        value = np.array(value, dtype=np.float64)
        if value.ndim == 1:
            value = value.reshape(1, -1)
        if value.ndim != 2:
            raise DimensionError(f"parameter {name!r} must be 2-D, got shape {value.shape}")
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def items(self):
        return self.params.items()

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def shapes(self) -> Dict[str, Tuple[int, int]]:
        return {name: p.shape for name, p in self.params.items()}

    def copy(self) -> "ParamStore":
        return ParamStore(
            params={k: v.copy() for k, v in self.params.items()},
            grads={k: v.copy() for k, v in self.grads.items()},
            step=self.step,
            epoch=self.epoch,
        )

    def check_compatible(self, other: "ParamStore") -> None:
        """Raise DataError unless both stores hold the same names and shapes."""
        mine, theirs = self.shapes(), other.shapes()
        if mine != theirs:
            diff = sorted(set(mine.items()) ^ set(theirs.items()))
            raise DataError(f"checkpoint parameters do not match the configured model: {diff}")

    # --- checkpointing ---

    def to_bytes(self) -> bytes:
        out = bytearray()
        out += MAGIC
        out += struct.pack("<IIQI", VERSION, self.epoch, self.step, len(self.params))
        for name, value in self.params.items():
            encoded = name.encode("utf-8")
            rows, cols = value.shape
            out += struct.pack("<I", len(encoded))
            out += encoded
            out += struct.pack("<II", rows, cols)
            out += np.ascontiguousarray(value, dtype="<f8").tobytes()
        return bytes(out)

    @classmethod
    def from_bytes(cls, blob: bytes, source: str = "<bytes>") -> "ParamStore":
        if blob[:4] != MAGIC:
            raise DataError(f"{source}: not a TZSH checkpoint")
        try:
            version, epoch, step, count = struct.unpack_from("<IIQI", blob, 4)
            if version != VERSION:
                raise DataError(f"{source}: unsupported checkpoint version {version}")
            offset = 4 + struct.calcsize("<IIQI")
            store = cls(step=step, epoch=epoch)
            for _ in range(count):
                (name_len,) = struct.unpack_from("<I", blob, offset)
                offset += 4
                name = blob[offset:offset + name_len].decode("utf-8")
                offset += name_len
                rows, cols = struct.unpack_from("<II", blob, offset)
                offset += 8
                n_bytes = rows * cols * 8
                if offset + n_bytes > len(blob):
                    raise DataError(f"{source}: truncated data for parameter {name!r}")
                data = np.frombuffer(blob, dtype="<f8", count=rows * cols, offset=offset)
                offset += n_bytes
                store.add(name, data.reshape(rows, cols).astype(np.float64))
        except struct.error as e:
            raise DataError(f"{source}: truncated checkpoint ({e})") from e
        return store

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "ParamStore":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"checkpoint not found: {path}")
        return cls.from_bytes(path.read_bytes(), source=str(path))
