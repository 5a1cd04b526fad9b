"""EmbeddingVector model."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

NORM_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """An L2-normalized embedding, stored as a read-only float64 array."""
    values: np.ndarray

    @classmethod
    def normalized(cls, raw: Sequence[float] | np.ndarray) -> "EmbeddingVector":
        """L2-normalize *raw*; a zero vector cannot be normalized."""
        arr = np.asarray(raw, dtype=np.float64).ravel()
        norm = float(np.linalg.norm(arr))
        if arr.size == 0 or norm == 0.0:
            raise ValueError("cannot normalize an empty or zero vector")
        arr = arr / norm
        arr.setflags(write=False)
        return cls(values=arr)

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])

    def cosine(self, other: "EmbeddingVector") -> float:
        return float(np.dot(self.values, other.values))

    def to_list(self) -> list[float]:
        return [float(v) for v in self.values]

    def __eq__(self, other: object) -> bool:
        if isinstance(other, EmbeddingVector):
            return np.array_equal(self.values, other.values)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.values.tobytes())

    def __repr__(self) -> str:
        return f"EmbeddingVector(dimension={self.dimension})"
