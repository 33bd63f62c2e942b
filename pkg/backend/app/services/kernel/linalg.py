"""
Tolerant dense linear algebra on labelled vector families.
"""
from dataclasses import dataclass
from typing import Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.exceptions import DimensionMismatchError

RANK_FLOOR = 1e-12

Label = Hashable


@dataclass(frozen=True)
class VecFamily:
    """Labelled vectors of a common dimension, stored as the rows of ``matrix``."""

    labels: Tuple[Label, ...]
    matrix: np.ndarray  # shape (len(labels), dim)
    dim: int

    def __post_init__(self):
        if self.matrix.shape != (len(self.labels), self.dim):
            raise DimensionMismatchError(
                f"family matrix has shape {self.matrix.shape}, expected {(len(self.labels), self.dim)}"
            )
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("family labels must be distinct")

    @classmethod
    def of(
        cls,
        items: Union[Mapping[Label, Sequence[float]], Iterable[Tuple[Label, Sequence[float]]]],
        dim: Optional[int] = None,
    ) -> "VecFamily":
        pairs = list(items.items()) if isinstance(items, Mapping) else list(items)
        if not pairs:
            if dim is None:
                raise ValueError("empty family needs an explicit dimension")
            return cls((), np.zeros((0, dim)), dim)
        vectors = [np.atleast_1d(np.asarray(v, dtype=float)) for _, v in pairs]
        sizes = {v.shape[0] for v in vectors}
        if len(sizes) != 1 or (dim is not None and sizes != {dim}):
            raise DimensionMismatchError(f"vectors of dimensions {sorted(sizes)} in one family")
        size = sizes.pop()
        return cls(tuple(label for label, _ in pairs), np.vstack(vectors), size)

    @classmethod
    def empty(cls, dim: int) -> "VecFamily":
        return cls((), np.zeros((0, dim)), dim)

    def __len__(self) -> int:
        return len(self.labels)

    def vector(self, label: Label) -> np.ndarray:
        return self.matrix[self.labels.index(label)]

    def subfamily(self, labels: Iterable[Label]) -> "VecFamily":
        keep = list(labels)
        rows = [self.labels.index(label) for label in keep]
        return VecFamily(tuple(keep), self.matrix[rows].reshape(len(rows), self.dim), self.dim)

    def union(self, other: "VecFamily") -> "VecFamily":
        if other.dim != self.dim:
            raise DimensionMismatchError(f"cannot join dimension {self.dim} with {other.dim}")
        return VecFamily(self.labels + other.labels, np.vstack([self.matrix, other.matrix]), self.dim)


def rank_threshold(singular_values: np.ndarray, tol_rank: float) -> float:
    largest = float(singular_values.max()) if singular_values.size else 0.0
    return max(tol_rank * max(largest, 1.0), RANK_FLOOR)


def matrix_rank(matrix: np.ndarray, tol_rank: float = 1e-8) -> int:
    if matrix.size == 0:
        return 0
    singular_values = np.linalg.svd(matrix, compute_uv=False)
    return int(np.sum(singular_values > rank_threshold(singular_values, tol_rank)))


def num_rank(fam: VecFamily, tol_rank: float = 1e-8) -> int:
    """Number of singular values above ``tol_rank`` relative to the largest (floored at 1)."""
    return matrix_rank(fam.matrix, tol_rank)


def is_independent(fam: VecFamily, tol_rank: float = 1e-8) -> bool:
    return num_rank(fam, tol_rank) == len(fam)


def null_combination(matrix: np.ndarray) -> np.ndarray:
    """Coefficients ``c`` (unit 2-norm) minimising ``||c @ matrix||``."""
    _, _, vh = np.linalg.svd(matrix.T)
    return vh[-1]


def basis_subset(fam: VecFamily, tol_rank: float = 1e-8) -> List[Label]:
    """Greedy basis of the span, scanning labels in ascending order."""
    chosen: List[int] = []
    rank = 0
    order = sorted(range(len(fam)), key=lambda i: fam.labels[i])
    for i in order:
        trial = fam.matrix[chosen + [i]]
        trial_rank = matrix_rank(trial, tol_rank)
        if trial_rank > rank:
            chosen.append(i)
            rank = trial_rank
    return [fam.labels[i] for i in sorted(chosen, key=lambda i: fam.labels[i])]


def orthonormal_span(matrix: np.ndarray, tol_rank: float = 1e-8) -> np.ndarray:
    """Orthonormal basis (columns) of the span of the rows of ``matrix``."""
    if matrix.size == 0:
        return np.zeros((matrix.shape[1] if matrix.ndim == 2 else 0, 0))
    u, s, _ = np.linalg.svd(matrix.T, full_matrices=False)
    r = int(np.sum(s > rank_threshold(s, tol_rank)))
    return u[:, :r]
