"""Kernelized first-order learner: support-vector expansion of each column.

Every column predictor, threshold included, is represented implicitly as

    score_i(x) = sum_k alphas[k][i] * K(x_k, x)

over the retained support vectors x_k. An active round appends the
incoming example once, accumulating the coefficients of all its sub-updates
into a single alpha row; a passive round stores nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Example, LabelSet, SparseVector
from .linear_learners import DivergenceError, FaltConfig
from .loss import ScoreVector, gradient_coeffs, loss_from_scores, predict_from_scores


@dataclass(frozen=True)
class KernelDescriptor:
    kind: str = "rbf"
    sigma2: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValueError(f"rbf width sigma2 must be positive, got {self.sigma2}")


def kernel_eval(k: KernelDescriptor, a: SparseVector, b: SparseVector) -> float:
    """Kernel value between two sparse vectors.

    The rbf distance is computed from cached norms and one sparse dot,
    never by materialising the difference vector.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    dot = _sparse_sparse_dot(a, b)
    if k.kind == "linear":
        return dot
    dist2 = max(a.sq_norm + b.sq_norm - 2.0 * dot, 0.0)
    return float(np.exp(-dist2 / (2.0 * k.sigma2)))


def _sparse_sparse_dot(a: SparseVector, b: SparseVector) -> float:
    if a.nnz == 0 or b.nnz == 0:
        return 0.0
    common, ia, ib = np.intersect1d(a.indices, b.indices, assume_unique=True, return_indices=True)
    if common.size == 0:
        return 0.0
    return float(a.values[ia] @ b.values[ib])


class KernelModel:
    """Support vectors plus per-vector coefficient rows of length L+1.

    Support rows are kept densified in a capacity-doubling buffer so kernel
    rows against the whole support set are a couple of BLAS calls.
    """

    def __init__(self, kernel: KernelDescriptor, L: int, d: int):
        if L < 1 or d < 1:
            raise ValueError("L and d must be >= 1")
        self.kernel = kernel
        self.L = L
        self.d = d
        self._n = 0
        cap = 16
        self._sv_dense = np.zeros((cap, d))
        self._sv_sq_norm = np.zeros(cap)
        self._alphas = np.zeros((cap, L + 1))
        self._support: list[SparseVector] = []

    @property
    def n_support(self) -> int:
        return self._n

    @property
    def support(self) -> list[SparseVector]:
        return list(self._support)

    @property
    def alphas(self) -> np.ndarray:
        return self._alphas[: self._n]

    def _grow(self):
        cap = self._sv_dense.shape[0] * 2
        for name in ("_sv_dense", "_alphas"):
            old = getattr(self, name)
            new = np.zeros((cap,) + old.shape[1:])
            new[: self._n] = old[: self._n]
            setattr(self, name, new)
        sq = np.zeros(cap)
        sq[: self._n] = self._sv_sq_norm[: self._n]
        self._sv_sq_norm = sq

    def append(self, x: SparseVector, alpha_row: np.ndarray) -> None:
        if x.dim != self.d:
            raise ValueError(f"dimension mismatch: x.dim={x.dim}, model d={self.d}")
        if self._n == self._sv_dense.shape[0]:
            self._grow()
        n = self._n
        self._sv_dense[n, :] = 0.0
        self._sv_dense[n, x.indices] = x.values
        self._sv_sq_norm[n] = x.sq_norm
        self._alphas[n] = alpha_row
        self._support.append(x)
        self._n += 1

    def add_to_last_row(self, delta: np.ndarray) -> None:
        self._alphas[self._n - 1] += delta

    def kernel_row(self, x: SparseVector) -> np.ndarray:
        """K(x_k, x) for every support vector k."""
        if x.dim != self.d:
            raise ValueError(f"dimension mismatch: x.dim={x.dim}, model d={self.d}")
        n = self._n
        if n == 0:
            return np.zeros(0)
        if x.nnz:
            dots = self._sv_dense[:n, x.indices] @ x.values
        else:
            dots = np.zeros(n)
        if self.kernel.kind == "linear":
            return dots
        dist2 = np.maximum(self._sv_sq_norm[:n] + x.sq_norm - 2.0 * dots, 0.0)
        return np.exp(-dist2 / (2.0 * self.kernel.sigma2))

    def scores_from_row(self, row: np.ndarray) -> ScoreVector:
        n = row.shape[0]
        raw = self._alphas[:n].T @ row if n else np.zeros(self.L + 1)
        return ScoreVector(raw[: self.L], float(raw[self.L]))


def kscore(m: KernelModel, x: SparseVector) -> ScoreVector:
    """Label and threshold scores from the support expansion."""
    return m.scores_from_row(m.kernel_row(x))


def kfalt_round(
    m: KernelModel,
    ex: Example,
    cfg: FaltConfig,
    precomputed_row: np.ndarray | None = None,
    self_kernel: float | None = None,
) -> tuple[int, float]:
    """One online round of the kernelized first-order learner.

    The kernel row against the current support set is computed once per
    round (or taken from ``precomputed_row``); scores are fully recomputed
    each sub-update, including the self term once the example's own row has
    been appended. Coefficient increments are -eta times the per-column
    gradient coefficients, exactly mirroring the explicit linear step.
    """
    row = m.kernel_row(ex.x) if precomputed_row is None else precomputed_row[: m.n_support]
    if self_kernel is None:
        self_kernel = kernel_eval(m.kernel, ex.x, ex.x)
    appended = False
    loss_before = None
    rounds_used = 0
    for _ in range(cfg.max_learn):
        sv = m.scores_from_row(row)
        coeffs, _, loss = gradient_coeffs(sv, ex.y)
        if loss_before is None:
            loss_before = loss
        if loss == 0.0:
            break
        tau = -cfg.eta * coeffs
        if not np.all(np.isfinite(tau)):
            raise DivergenceError(f"non-finite coefficient; eta={cfg.eta} diverged")
        if appended:
            m.add_to_last_row(tau)
        else:
            m.append(ex.x, tau)
            row = np.append(row, self_kernel)
            appended = True
        rounds_used += 1
    return rounds_used, float(loss_before)


class KernelFaltLearner:
    """Harness-facing wrapper around a KernelModel.

    ``attach_gram`` lets training over a fixed in-memory dataset reuse a
    precomputed Gram matrix: kernel rows become row lookups against the
    stream positions of the retained support vectors.
    """

    algo = "falt-k"

    def __init__(self, L: int, d: int, cfg: FaltConfig, kernel: KernelDescriptor):
        self.model = KernelModel(kernel, L, d)
        self.cfg = cfg
        self._gram: np.ndarray | None = None
        self._support_pos: list[int] = []
        self._stream_pos = 0

    def attach_gram(self, gram: np.ndarray) -> None:
        if self.model.n_support:
            raise ValueError("attach the Gram matrix before any training round")
        self._gram = gram
        self._stream_pos = 0

    def round(self, ex: Example) -> tuple[int, float]:
        if self._gram is None:
            result = kfalt_round(self.model, ex, self.cfg)
            return result
        t = self._stream_pos
        row = self._gram[t, self._support_pos] if self._support_pos else np.zeros(0)
        before = self.model.n_support
        result = kfalt_round(
            self.model, ex, self.cfg, precomputed_row=row, self_kernel=float(self._gram[t, t])
        )
        if self.model.n_support > before:
            self._support_pos.append(t)
        self._stream_pos += 1
        return result

    def predict(self, x: SparseVector) -> LabelSet:
        return predict_from_scores(kscore(self.model, x))

    def scores(self, x: SparseVector) -> ScoreVector:
        return kscore(self.model, x)

    def entry_loss(self, ex: Example) -> float:
        return loss_from_scores(kscore(self.model, ex.x), ex.y)

    def config(self) -> dict:
        return {
            "algo": self.algo,
            "eta": self.cfg.eta,
            "max_learn": self.cfg.max_learn,
            "kernel": self.model.kernel.kind,
            "sigma2": self.model.kernel.sigma2,
        }

    def support_size(self) -> int:
        return self.model.n_support

    def snapshot_state(self) -> dict:
        return {
            "format": "altlearn-model",
            "version": 1,
            "algo": self.algo,
            "L": self.model.L,
            "d": self.model.d,
            "eta": self.cfg.eta,
            "max_learn": self.cfg.max_learn,
            "kernel": {"kind": self.model.kernel.kind, "sigma2": self.model.kernel.sigma2},
            "support": [
                {"indices": sv.indices.tolist(), "values": sv.values.tolist()}
                for sv in self.model.support
            ],
            "alphas": self.model.alphas.tolist(),
        }

    @classmethod
    def from_snapshot(cls, state: dict) -> "KernelFaltLearner":
        kernel = KernelDescriptor(state["kernel"]["kind"], state["kernel"]["sigma2"])
        learner = cls(
            state["L"], state["d"], FaltConfig(state["eta"], state["max_learn"]), kernel
        )
        for sv_state, row in zip(state["support"], state["alphas"]):
            x = SparseVector(
                np.asarray(sv_state["indices"], dtype=np.int64),
                np.asarray(sv_state["values"], dtype=np.float64),
                state["d"],
            )
            learner.model.append(x, np.asarray(row, dtype=np.float64))
        return learner
