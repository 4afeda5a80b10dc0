"""Piecewise output correction for heads trained on imbalanced labels.

Two extra linear branches sit in parallel with a frozen head's output
layer: when the raw score exceeds ``alpha`` the addition branch's output
is added, when it falls below ``beta`` the subtraction branch's output is
subtracted, and scores in between pass through untouched (boundary
equalities included). Only the branches are trained; each example routes
gradient solely through its active branch.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .heads import MOS_MAX, MOS_MIN, HeadPredictor
from .training import TrainConfig, check_validation_split, run_sgd, sign

N_SEGMENTS = 16
SEGMENT_WIDTH = 0.25
SEGMENT_CSV_COLUMNS = ["segment_lo", "segment_hi", "count", "mse"]


def check_thresholds(alpha: float, beta: float) -> None:
    if not (1.0 < beta < alpha < 5.0):
        raise ValueError(f"thresholds must satisfy 1 < beta < alpha < 5, got beta={beta}, alpha={alpha}")


def apply_bias(y_hat, b_a, b_s, alpha: float, beta: float):
    """Piecewise correction: +b_a above alpha, -b_s below beta, identity
    in the middle band (boundary equalities fall in the middle)."""
    check_thresholds(alpha, beta)
    y_hat_arr = np.asarray(y_hat, dtype=np.float64)
    out = np.where(
        y_hat_arr > alpha,
        y_hat_arr + b_a,
        np.where(y_hat_arr < beta, y_hat_arr - b_s, y_hat_arr),
    )
    return float(out) if np.ndim(y_hat) == 0 else out


class BiasCorrector(RegressorMixin, BaseEstimator):
    """Trains the add/subtract branches on top of a frozen, fitted head.

    The branches consume the same feature vector the head's output layer
    consumes. Branch parameters start at zero, so an untrained corrector
    reproduces the head exactly.
    """

    def __init__(
        self,
        head=None,
        alpha=4.0,
        beta=2.0,
        learning_rate=0.0001,
        batch_size=4,
        max_epochs=1000,
        patience=15,
        seed=0,
    ):
        self.head = head
        self.alpha = alpha
        self.beta = beta
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed

    def _check_head(self) -> HeadPredictor:
        if not isinstance(self.head, HeadPredictor):
            raise ValueError("head must be a fitted HeadPredictor")
        check_is_fitted(self.head, "weights_")
        return self.head

    def _corrected(self, params: dict, V: np.ndarray) -> np.ndarray:
        head = self.head
        base = V @ head.weights_ + head.bias_
        add = base > self.alpha
        sub = base < self.beta
        out = base.copy()
        out[add] += V[add] @ params["add_w"] + params["add_b"]
        out[sub] -= V[sub] @ params["sub_w"] + params["sub_b"]
        return out

    def _grad(self, params: dict, Vb: np.ndarray, yb: np.ndarray) -> dict:
        head = self.head
        base = Vb @ head.weights_ + head.bias_
        add = base > self.alpha
        sub = base < self.beta
        pred = base.copy()
        pred[add] += Vb[add] @ params["add_w"] + params["add_b"]
        pred[sub] -= Vb[sub] @ params["sub_w"] + params["sub_b"]
        s = sign(pred - yb) / yb.size
        return {
            "add_w": Vb[add].T @ s[add],
            "add_b": np.array(s[add].sum()),
            "sub_w": -(Vb[sub].T @ s[sub]),
            "sub_b": np.array(-s[sub].sum()),
        }

    def fit(self, X, y, X_val=None, y_val=None, val_systems=None):
        head = self._check_head()
        check_thresholds(self.alpha, self.beta)
        X = check_array(X, dtype=np.float64)
        y = column_or_1d(y).astype(np.float64)
        if y.size != X.shape[0]:
            raise ValueError(f"{X.shape[0]} rows but {y.size} labels")
        if X_val is None or y_val is None or val_systems is None:
            raise ValueError("fit requires X_val, y_val and val_systems for SRCC checkpointing")
        check_validation_split(column_or_1d(y_val), val_systems)

        V = head.transform(X)
        d = V.shape[1]
        zeros = {
            "add_w": np.zeros(d), "add_b": np.array(0.0),
            "sub_w": np.zeros(d), "sub_b": np.array(0.0),
        }
        base = V @ head.weights_ + head.bias_
        if not np.any(base > self.alpha) and not np.any(base < self.beta):
            warnings.warn(
                "no training example activates either correction branch; "
                "returning the zero-initialized branches",
                stacklevel=2,
            )
            result_params, history, best_epoch, best_srcc = zeros, [], 0, float("nan")
        else:
            V_val = head.transform(check_array(X_val, dtype=np.float64))
            rng = np.random.default_rng(self.seed)
            result = run_sgd(
                zeros, self._grad, self._corrected,
                V, y, V_val, column_or_1d(y_val).astype(np.float64), val_systems,
                TrainConfig(
                    learning_rate=self.learning_rate,
                    batch_size=self.batch_size,
                    max_epochs=self.max_epochs,
                    early_stop_patience=self.patience,
                    seed=self.seed,
                ),
                rng,
            )
            result_params = result.params
            history, best_epoch, best_srcc = result.history, result.best_epoch, result.best_val_srcc

        self.add_weights_ = np.asarray(result_params["add_w"], dtype=np.float64)
        self.add_bias_ = float(result_params["add_b"])
        self.sub_weights_ = np.asarray(result_params["sub_w"], dtype=np.float64)
        self.sub_bias_ = float(result_params["sub_b"])
        self.n_features_in_ = X.shape[1]
        self.history_ = history
        self.best_epoch_ = best_epoch
        self.best_val_srcc_ = best_srcc
        return self

    def predict(self, X) -> np.ndarray:
        """Corrected scores for assembled inputs (same X the head takes)."""
        check_is_fitted(self, "add_weights_")
        head = self._check_head()
        V = head.transform(X)
        return self._corrected(
            {
                "add_w": self.add_weights_, "add_b": self.add_bias_,
                "sub_w": self.sub_weights_, "sub_b": self.sub_bias_,
            },
            V,
        )


@dataclass(frozen=True)
class SegmentMse:
    lo: float
    hi: float
    count: int
    mse: float | None


def segment_mse(predictions, labels) -> list[SegmentMse]:
    """Per-segment MSE over 16 label segments of width 0.25 on [1, 5].

    Segment k covers [1 + 0.25(k-1), 1 + 0.25k), the last closed at 5.
    Empty segments carry count 0 and no MSE value.
    """
    p = np.asarray(predictions, dtype=np.float64)
    l = np.asarray(labels, dtype=np.float64)
    if p.shape != l.shape or p.ndim != 1:
        raise ValueError("predictions and labels must be equal-length 1-D vectors")
    if p.size and (l.min() < MOS_MIN or l.max() > MOS_MAX):
        raise ValueError("labels must lie in [1, 5]")
    segments = []
    for k in range(1, N_SEGMENTS + 1):
        lo = MOS_MIN + SEGMENT_WIDTH * (k - 1)
        hi = lo + SEGMENT_WIDTH
        mask = (l >= lo) & (l < hi) if k < N_SEGMENTS else (l >= lo) & (l <= MOS_MAX)
        count = int(mask.sum())
        err = float(np.mean((p[mask] - l[mask]) ** 2)) if count else None
        segments.append(SegmentMse(lo=lo, hi=hi, count=count, mse=err))
    return segments


def write_segment_csv(segments, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SEGMENT_CSV_COLUMNS)
        for seg in segments:
            writer.writerow(
                [repr(seg.lo), repr(seg.hi), seg.count, repr(seg.mse) if seg.mse is not None else ""]
            )
