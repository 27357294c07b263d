"""First-order and adaptive second-order online updates of the weight matrix.

Both learners share the round protocol: re-evaluate the loss, stop if it is
zero, otherwise take a gradient step, up to ``max_learn`` times per example.
The first-order step is a plain constant-step subgradient descent

    w_i <- w_i - eta * c_i * x

while the second-order step scales each coordinate by its own accumulated
gradient history

    w_i[j] <- w_i[j] - eta * c_i * x[j] / (delta + sqrt(sq_sum_i[j]))

with the accumulator updated before the step so the current round's
gradient is included in its own learning rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Example, LabelSet, SparseVector, WeightMatrix
from .loss import ScoreVector, loss_eval, predict, score, subgradient


class DivergenceError(RuntimeError):
    """A weight turned non-finite, which signals a divergent step size."""


@dataclass(frozen=True)
class FaltConfig:
    eta: float = 1.0
    max_learn: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise ValueError(f"eta must be finite and positive, got {self.eta}")
        if self.max_learn < 1:
            raise ValueError(f"max_learn must be >= 1, got {self.max_learn}")


@dataclass
class SaltState:
    """Adaptive-step state: running per-coordinate squared gradient sums.

    sqrt(sq_sum[i][j]) equals the 2-norm of coordinate j's gradient history
    in column i, without ever materialising the d-by-t history matrix.
    """

    sq_sum: np.ndarray
    delta: float
    eta: float
    max_learn: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"delta must be finite and positive, got {self.delta}")
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise ValueError(f"eta must be finite and positive, got {self.eta}")
        if self.max_learn < 1:
            raise ValueError(f"max_learn must be >= 1, got {self.max_learn}")

    @classmethod
    def zeros(cls, L: int, d: int, *, delta: float, eta: float, max_learn: int = 1) -> "SaltState":
        return cls(np.zeros((L + 1, d)), delta, eta, max_learn)


def falt_round(W: WeightMatrix, ex: Example, cfg: FaltConfig) -> tuple[int, float]:
    """One online round of the first-order learner, updating W in place.

    Returns (sub-updates applied, loss before any update).
    """
    loss_before = None
    rounds_used = 0
    for _ in range(cfg.max_learn):
        grad, _, loss = subgradient(W, ex)
        if loss_before is None:
            loss_before = loss
        if loss == 0.0:
            break
        nz = np.flatnonzero(grad.coeffs)
        block = np.ix_(nz, ex.x.indices)
        W.cols[block] -= cfg.eta * np.outer(grad.coeffs[nz], ex.x.values)
        if not np.all(np.isfinite(W.cols[block])):
            raise DivergenceError(f"non-finite weight after update; eta={cfg.eta} diverged")
        rounds_used += 1
    return rounds_used, float(loss_before)


def salt_round(W: WeightMatrix, st: SaltState, ex: Example) -> tuple[int, float]:
    """One online round of the adaptive-step learner, updating W and the
    accumulator state in place.

    Columns whose gradient coefficient is zero skip both the accumulation
    and the step: their gradient history column gains only a zero.
    """
    if st.sq_sum.shape != W.cols.shape:
        raise ValueError("accumulator shape does not match the weight matrix")
    loss_before = None
    rounds_used = 0
    for _ in range(st.max_learn):
        grad, _, loss = subgradient(W, ex)
        if loss_before is None:
            loss_before = loss
        if loss == 0.0:
            break
        nz = np.flatnonzero(grad.coeffs)
        block = np.ix_(nz, ex.x.indices)
        g = np.outer(grad.coeffs[nz], ex.x.values)
        sq = st.sq_sum[block] + g * g
        st.sq_sum[block] = sq
        W.cols[block] -= st.eta * g / (st.delta + np.sqrt(sq))
        if not np.all(np.isfinite(W.cols[block])):
            raise DivergenceError(
                f"non-finite weight after update; eta={st.eta}, delta={st.delta} diverged"
            )
        rounds_used += 1
    return rounds_used, float(loss_before)


class FaltLearner:
    """Harness-facing wrapper holding a weight matrix and the step config."""

    algo = "falt"

    def __init__(self, L: int, d: int, cfg: FaltConfig):
        self.W = WeightMatrix.zeros(L, d)
        self.cfg = cfg

    def round(self, ex: Example) -> tuple[int, float]:
        return falt_round(self.W, ex, self.cfg)

    def predict(self, x: SparseVector) -> LabelSet:
        return predict(self.W, x)

    def scores(self, x: SparseVector) -> ScoreVector:
        return score(self.W, x)

    def entry_loss(self, ex: Example) -> float:
        return loss_eval(self.W, ex)

    def config(self) -> dict:
        return {"algo": self.algo, "eta": self.cfg.eta, "max_learn": self.cfg.max_learn}

    def snapshot_state(self) -> dict:
        return {
            "format": "altlearn-model",
            "version": 1,
            "algo": self.algo,
            "L": self.W.L,
            "d": self.W.d,
            "eta": self.cfg.eta,
            "max_learn": self.cfg.max_learn,
            "columns": self.W.cols.tolist(),
        }

    @classmethod
    def from_snapshot(cls, state: dict) -> "FaltLearner":
        learner = cls(state["L"], state["d"], FaltConfig(state["eta"], state["max_learn"]))
        cols = np.asarray(state["columns"], dtype=np.float64)
        if cols.shape != learner.W.cols.shape:
            raise ValueError("snapshot column shape mismatch")
        learner.W = WeightMatrix(cols)
        return learner


class SaltLearner:
    """Harness-facing wrapper holding a weight matrix and adaptive state."""

    algo = "salt"

    def __init__(self, L: int, d: int, *, eta: float, delta: float, max_learn: int = 1):
        self.W = WeightMatrix.zeros(L, d)
        self.state = SaltState.zeros(L, d, delta=delta, eta=eta, max_learn=max_learn)

    def round(self, ex: Example) -> tuple[int, float]:
        return salt_round(self.W, self.state, ex)

    def predict(self, x: SparseVector) -> LabelSet:
        return predict(self.W, x)

    def scores(self, x: SparseVector) -> ScoreVector:
        return score(self.W, x)

    def entry_loss(self, ex: Example) -> float:
        return loss_eval(self.W, ex)

    def config(self) -> dict:
        return {
            "algo": self.algo,
            "eta": self.state.eta,
            "delta": self.state.delta,
            "max_learn": self.state.max_learn,
        }

    def snapshot_state(self) -> dict:
        return {
            "format": "altlearn-model",
            "version": 1,
            "algo": self.algo,
            "L": self.W.L,
            "d": self.W.d,
            "eta": self.state.eta,
            "delta": self.state.delta,
            "max_learn": self.state.max_learn,
            "columns": self.W.cols.tolist(),
            "sq_sum": self.state.sq_sum.tolist(),
        }

    @classmethod
    def from_snapshot(cls, state: dict) -> "SaltLearner":
        learner = cls(
            state["L"],
            state["d"],
            eta=state["eta"],
            delta=state["delta"],
            max_learn=state["max_learn"],
        )
        cols = np.asarray(state["columns"], dtype=np.float64)
        sq = np.asarray(state["sq_sum"], dtype=np.float64)
        if cols.shape != learner.W.cols.shape or sq.shape != cols.shape:
            raise ValueError("snapshot shape mismatch")
        learner.W = WeightMatrix(cols)
        learner.state.sq_sum = sq
        return learner
