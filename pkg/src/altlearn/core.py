"""Sparse/dense numeric primitives and the shared domain types.

Everything downstream (losses, learners, metrics, the harness) is built on
the four types here: sparse feature vectors, label sets, labelled examples,
and the dense weight matrix with its extra threshold column.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SparseVector:
    """Sparse feature vector: sorted index/value pairs plus a declared dim.

    The squared norm is cached at construction; update rules and bound
    checks read it on every round.
    """

    indices: np.ndarray
    values: np.ndarray
    dim: int
    sq_norm: float = field(init=False)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        if idx.ndim != 1 or val.ndim != 1 or idx.shape != val.shape:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise ValueError(f"feature index out of range [0, {self.dim})")
        if np.any(val == 0.0):
            raise ValueError("zero values must not be stored explicitly")
        if not np.all(np.isfinite(val)):
            raise ValueError("non-finite feature value")
        object.__setattr__(self, "sq_norm", float(val @ val))

    @classmethod
    def from_dict(cls, entries: dict[int, float], dim: int) -> "SparseVector":
        items = sorted((int(i), float(v)) for i, v in entries.items() if v != 0.0)
        idx = np.array([i for i, _ in items], dtype=np.int64)
        val = np.array([v for _, v in items], dtype=np.float64)
        return cls(idx, val, dim)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def norm(self) -> float:
        return float(np.sqrt(self.sq_norm))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.dim, self.indices.tobytes(), self.values.tobytes()))


@dataclass(frozen=True)
class LabelSet:
    """Set of relevant labels over a universe of ``total_labels`` labels."""

    members: frozenset
    total_labels: int

    def __post_init__(self):
        members = frozenset(int(i) for i in self.members)
        object.__setattr__(self, "members", members)
        if self.total_labels < 1:
            raise ValueError("total_labels must be >= 1")
        if members and (min(members) < 0 or max(members) >= self.total_labels):
            raise ValueError(f"label out of range [0, {self.total_labels})")

    @classmethod
    def of(cls, labels, total_labels: int) -> "LabelSet":
        return cls(frozenset(labels), total_labels)

    def __contains__(self, label: int) -> bool:
        return label in self.members

    def __len__(self) -> int:
        return len(self.members)

    def sorted(self) -> list[int]:
        return sorted(self.members)

    def complement_size(self) -> int:
        return self.total_labels - len(self.members)

    def indicator(self) -> np.ndarray:
        """Boolean relevance mask of length total_labels."""
        mask = np.zeros(self.total_labels, dtype=bool)
        if self.members:
            mask[list(self.members)] = True
        return mask


@dataclass(frozen=True)
class Example:
    x: SparseVector
    y: LabelSet


class WeightMatrix:
    """Dense multi-label classifier: L label predictors plus one threshold
    predictor, each a length-d column.

    ``cols`` is an (L+1, d) array; row ``L`` is the threshold predictor.
    Columns are read densely at prediction time and written sparsely by the
    learners, so dense storage with sparse writes is used throughout.
    """

    __slots__ = ("cols", "L", "d")

    def __init__(self, cols: np.ndarray):
        cols = np.asarray(cols, dtype=np.float64)
        if cols.ndim != 2 or cols.shape[0] < 2:
            raise ValueError("expected an (L+1, d) array with L >= 1")
        if not np.all(np.isfinite(cols)):
            raise ValueError("weight entries must be finite")
        self.cols = cols
        self.L = cols.shape[0] - 1
        self.d = cols.shape[1]

    @classmethod
    def zeros(cls, L: int, d: int) -> "WeightMatrix":
        if L < 1 or d < 1:
            raise ValueError("L and d must be >= 1")
        return cls(np.zeros((L + 1, d)))

    def column(self, i: int) -> np.ndarray:
        return self.cols[i]

    @property
    def threshold_column(self) -> np.ndarray:
        return self.cols[self.L]

    def copy(self) -> "WeightMatrix":
        return WeightMatrix(self.cols.copy())

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.cols))


def sparse_dot(x: SparseVector, col: np.ndarray) -> float:
    """Inner product of a sparse vector with a dense column."""
    col = np.asarray(col)
    if col.ndim != 1 or col.shape[0] != x.dim:
        raise ValueError(f"dimension mismatch: x.dim={x.dim}, len(col)={col.shape}")
    if x.nnz == 0:
        return 0.0
    return float(col[x.indices] @ x.values)


def scaled_add(col: np.ndarray, c: float, x: SparseVector) -> None:
    """In-place col[j] += c * x[j] over the support of x."""
    col = np.asarray(col)
    if col.ndim != 1 or col.shape[0] != x.dim:
        raise ValueError(f"dimension mismatch: x.dim={x.dim}, len(col)={col.shape}")
    if not np.isfinite(c):
        raise ValueError(f"non-finite scale {c!r}")
    if c == 0.0 or x.nnz == 0:
        return
    col[x.indices] += c * x.values
