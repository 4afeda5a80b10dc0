"""SRCC-based predictor ranking and the linear score combiner."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .metrics import MetricReport
from .training import TrainConfig, run_sgd, sign

DEFAULT_TOP_K = 5


def rank_predictors(reports, k: int) -> list[str]:
    """Top-k predictor ids by system-level SRCC, descending.

    Ties break on lower system-level MSE, then lexicographic id, so the
    ordering is total and deterministic. ``reports`` is a sequence of
    (predictor id, MetricReport) pairs.
    """
    reports = list(reports)
    if k > len(reports):
        raise ValueError(f"k={k} exceeds the {len(reports)} available predictors")
    if k < 1:
        raise ValueError("k must be at least 1")

    def key(item):
        pid, report = item
        s = report.system.srcc
        m = report.system.mse
        return (
            -(s if not math.isnan(s) else -math.inf),
            m if not math.isnan(m) else math.inf,
            pid,
        )

    return [pid for pid, _ in sorted(reports, key=key)[:k]]


@dataclass(frozen=True)
class FusionModel:
    """A fixed, ordered member list plus the trained combiner."""

    member_ids: tuple
    weights: np.ndarray
    bias: float
    member_digests: tuple = ()

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.ndim != 1 or weights.size < 1:
            raise ValueError("combiner weights must be a non-empty vector")
        if len(self.member_ids) != weights.size:
            raise ValueError(
                f"{len(self.member_ids)} member ids but {weights.size} combiner weights"
            )
        if self.member_digests and len(self.member_digests) != weights.size:
            raise ValueError("member_digests must match the member count")
        if weights.flags.writeable:
            weights = weights.copy()
            weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "member_ids", tuple(self.member_ids))
        object.__setattr__(self, "member_digests", tuple(self.member_digests))
        object.__setattr__(self, "bias", float(self.bias))


def fuse_forward(member_scores, model: FusionModel) -> float:
    """Combine one utterance's member scores into the final score."""
    scores = np.asarray(member_scores, dtype=np.float64)
    if scores.shape != model.weights.shape:
        raise ValueError(f"expected {model.weights.size} member scores, got {scores.shape}")
    return float(scores @ model.weights + model.bias)


class ScoreCombiner(RegressorMixin, BaseEstimator):
    """Linear combiner over frozen members' scores, trained like the heads.

    Initialized at uniform weights 1/k with zero bias, so the fused model
    starts as the plain member average and every member remains reachable.
    """

    def __init__(self, learning_rate=0.0001, batch_size=4, max_epochs=1000, patience=15, seed=0):
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed

    def _predict(self, params: dict, S: np.ndarray) -> np.ndarray:
        return S @ params["w"] + params["b"]

    def _grad(self, params: dict, Sb: np.ndarray, yb: np.ndarray) -> dict:
        s = sign(self._predict(params, Sb) - yb) / yb.size
        return {"w": Sb.T @ s, "b": np.array(s.sum())}

    def fit(self, S, y, S_val=None, y_val=None, val_systems=None):
        """S holds one column of precomputed scores per member."""
        S = check_array(S, dtype=np.float64)
        y = column_or_1d(y).astype(np.float64)
        if S.shape[1] < 1:
            raise ValueError("at least one member is required")
        if S_val is None or y_val is None or val_systems is None:
            raise ValueError("fit requires S_val, y_val and val_systems for SRCC checkpointing")
        S_val = check_array(S_val, dtype=np.float64)
        if S_val.shape[1] != S.shape[1]:
            raise ValueError(f"validation has {S_val.shape[1]} members, training has {S.shape[1]}")

        k = S.shape[1]
        init = {"w": np.full(k, 1.0 / k), "b": np.array(0.0)}
        rng = np.random.default_rng(self.seed)
        result = run_sgd(
            init, self._grad, self._predict,
            S, y, S_val, column_or_1d(y_val).astype(np.float64), val_systems,
            TrainConfig(
                learning_rate=self.learning_rate,
                batch_size=self.batch_size,
                max_epochs=self.max_epochs,
                early_stop_patience=self.patience,
                seed=self.seed,
            ),
            rng,
        )
        self.weights_ = result.params["w"]
        self.bias_ = float(result.params["b"])
        self.n_features_in_ = k
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.best_val_srcc_ = result.best_val_srcc
        return self

    def predict(self, S) -> np.ndarray:
        check_is_fitted(self, "weights_")
        S = check_array(S, dtype=np.float64)
        if S.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} member columns, got {S.shape[1]}")
        return S @ self.weights_ + self.bias_

    def to_fusion_model(self, member_ids, member_digests=()) -> FusionModel:
        check_is_fitted(self, "weights_")
        return FusionModel(
            member_ids=tuple(member_ids),
            weights=self.weights_,
            bias=self.bias_,
            member_digests=tuple(member_digests),
        )
