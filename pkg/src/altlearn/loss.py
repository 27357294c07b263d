"""Multi-label thresholded hinge loss and its structured subgradient.

The classifier assigns each label a score and learns one extra threshold
score; a label is predicted relevant when its score strictly exceeds the
threshold score. The round loss averages hinge violations of the
relevant-above-threshold margins over the relevant set and of the
threshold-above-irrelevant margins over the irrelevant set:

    f(W) = (1/|Y|)  sum_{i in Y}    max(0, 1 - (x'w_i - x'w_thr))
         + (1/|Ybar|) sum_{i in Ybar} max(0, 1 - (x'w_thr - x'w_i))

An empty relevant (or irrelevant) set drops its term entirely. The
subgradient factors as a per-column scalar coefficient times the shared
sparse x, which is the exact form every learner consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Example, LabelSet, SparseVector, WeightMatrix


@dataclass(frozen=True)
class ScoreVector:
    """Per-label scores plus the threshold score for one instance."""

    label_scores: np.ndarray
    threshold_score: float

    def __post_init__(self):
        scores = np.asarray(self.label_scores, dtype=np.float64)
        object.__setattr__(self, "label_scores", scores)
        if scores.ndim != 1:
            raise ValueError("label_scores must be 1-d")
        if not (np.all(np.isfinite(scores)) and np.isfinite(self.threshold_score)):
            raise ValueError("scores must be finite")

    @property
    def L(self) -> int:
        return int(self.label_scores.shape[0])


@dataclass(frozen=True)
class ViolationFlags:
    """Margin-violation indicators.

    ``a[i]`` is meaningful only for relevant labels, ``b[i]`` only for
    irrelevant ones; ``a_sum``/``b_sum`` are their restricted sums.
    """

    a: np.ndarray
    b: np.ndarray
    a_sum: int
    b_sum: int


@dataclass(frozen=True)
class StructuredGradient:
    """Per-column coefficients c with gradient column i equal to c[i] * x.

    coeffs has length L+1; the last entry drives the threshold predictor.
    """

    coeffs: np.ndarray
    x: SparseVector

    def column(self, i: int) -> np.ndarray:
        return self.coeffs[i] * self.x.to_dense()

    def sq_norm_total(self) -> float:
        """sum_i ||gradient column i||^2 = ||x||^2 * sum_i c_i^2."""
        return float(self.x.sq_norm * (self.coeffs @ self.coeffs))


def score(W: WeightMatrix, x: SparseVector) -> ScoreVector:
    """All L label scores and the threshold score in one sparse pass."""
    if x.dim != W.d:
        raise ValueError(f"dimension mismatch: x.dim={x.dim}, W.d={W.d}")
    if x.nnz == 0:
        raw = np.zeros(W.L + 1)
    else:
        raw = W.cols[:, x.indices] @ x.values
    return ScoreVector(raw[: W.L], float(raw[W.L]))


def predict(W: WeightMatrix, x: SparseVector) -> LabelSet:
    """Labels scoring strictly above the threshold score; ties excluded."""
    sv = score(W, x)
    relevant = np.flatnonzero(sv.label_scores > sv.threshold_score)
    return LabelSet.of(relevant.tolist(), W.L)


def predict_from_scores(sv: ScoreVector) -> LabelSet:
    relevant = np.flatnonzero(sv.label_scores > sv.threshold_score)
    return LabelSet.of(relevant.tolist(), sv.L)


def loss_from_scores(sv: ScoreVector, y: LabelSet) -> float:
    """Evaluate the round loss given precomputed scores."""
    y_mask = y.indicator()
    n_rel = len(y)
    n_irr = y.complement_size()
    thr = sv.threshold_score
    total = 0.0
    if n_rel:
        rel_margin = sv.label_scores[y_mask] - thr
        total += float(np.maximum(0.0, 1.0 - rel_margin).sum()) / n_rel
    if n_irr:
        irr_margin = thr - sv.label_scores[~y_mask]
        total += float(np.maximum(0.0, 1.0 - irr_margin).sum()) / n_irr
    return total


def loss_eval(W: WeightMatrix, ex: Example) -> float:
    """Round loss of W on one example."""
    return loss_from_scores(score(W, ex.x), ex.y)


def gradient_coeffs(sv: ScoreVector, y: LabelSet) -> tuple[np.ndarray, ViolationFlags, float]:
    """Violation flags, per-column gradient coefficients, and the loss.

    Indicators use strict `margin < 1`, so a margin of exactly 1 (a hinge
    kink) contributes zero: one valid subgradient at the kink. Coefficients:

        c_i   = -a_i / |Y|        for relevant i
        c_i   = +b_i / |Ybar|     for irrelevant i
        c_thr = a_sum / |Y| - b_sum / |Ybar|

    with any empty-set term dropped.
    """
    L = sv.L
    if y.total_labels != L:
        raise ValueError(f"label count mismatch: scores have L={L}, y has {y.total_labels}")
    y_mask = y.indicator()
    n_rel = len(y)
    n_irr = y.complement_size()
    thr = sv.threshold_score
    rel_margin = sv.label_scores - thr

    a = y_mask & (rel_margin < 1.0)
    b = (~y_mask) & (-rel_margin < 1.0)
    a_sum = int(a.sum())
    b_sum = int(b.sum())

    coeffs = np.zeros(L + 1)
    loss = 0.0
    c_thr = 0.0
    if n_rel:
        coeffs[:L][a] = -1.0 / n_rel
        loss += float(np.maximum(0.0, 1.0 - rel_margin[y_mask]).sum()) / n_rel
        c_thr += a_sum / n_rel
    if n_irr:
        coeffs[:L][b] = 1.0 / n_irr
        loss += float(np.maximum(0.0, 1.0 + rel_margin[~y_mask]).sum()) / n_irr
        c_thr -= b_sum / n_irr
    coeffs[L] = c_thr
    return coeffs, ViolationFlags(a, b, a_sum, b_sum), loss


def subgradient(W: WeightMatrix, ex: Example) -> tuple[StructuredGradient, ViolationFlags, float]:
    """Structured subgradient of the round loss at W, with the loss itself
    returned from the same pass."""
    coeffs, flags, loss = gradient_coeffs(score(W, ex.x), ex.y)
    return StructuredGradient(coeffs, ex.x), flags, loss
