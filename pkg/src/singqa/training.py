"""Mini-batch SGD on mean L1 loss with SRCC-based checkpointing.

All trainable components share this loop: shuffle with a seeded
generator, plain SGD updates (no momentum, no weight decay), evaluate
the system-level SRCC on the validation split after every epoch, keep
the best-SRCC parameters and stop once the SRCC has not improved for
``early_stop_patience`` epochs. An epoch that ties the best SRCC counts
as an improvement, so plateaus do not trigger early stopping.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .metrics import srcc, system_aggregate


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0001
    batch_size: int = 4
    max_epochs: int = 1000
    early_stop_patience: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.max_epochs <= 0 or self.early_stop_patience <= 0:
            raise ValueError("all training parameters must be positive")


@dataclass
class TrainResult:
    params: dict
    history: list = field(default_factory=list)  # (epoch, train_l1, val_srcc)
    best_epoch: int = 0
    best_val_srcc: float = math.nan


def system_level_srcc(predictions, labels, system_ids) -> float:
    _, sys_pred, sys_label = system_aggregate(predictions, labels, system_ids)
    return srcc(sys_pred, sys_label)


def check_validation_split(y_val, val_systems) -> None:
    y_val = np.asarray(y_val, dtype=np.float64)
    if y_val.size == 0:
        raise ValueError("validation split must be non-empty")
    if len(set(val_systems)) < 2:
        raise ValueError("validation split must cover at least two systems for rank correlation")


def run_sgd(
    params: dict,
    grad_fn,
    predict_fn,
    X: np.ndarray,
    y: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    val_systems,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> TrainResult:
    """Train ``params`` in place-free fashion and return the best checkpoint.

    ``grad_fn(params, Xb, yb)`` returns mean-over-batch subgradients keyed
    like ``params``; ``predict_fn(params, X)`` returns scores.
    """
    n = y.shape[0]
    if n == 0:
        raise ValueError("training split must be non-empty")
    check_validation_split(y_val, val_systems)
    val_systems = list(val_systems)

    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    best = TrainResult(params={k: v.copy() for k, v in params.items()})
    best_srcc = -math.inf
    stale_epochs = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            grads = grad_fn(params, X[batch], y[batch])
            for key, grad in grads.items():
                params[key] = params[key] - cfg.learning_rate * grad

        train_l1 = float(np.mean(np.abs(predict_fn(params, X) - y)))
        val_srcc = system_level_srcc(predict_fn(params, X_val), y_val, val_systems)
        best.history.append((epoch, train_l1, val_srcc))

        if not math.isnan(val_srcc) and val_srcc >= best_srcc:
            best_srcc = val_srcc
            best.params = {k: v.copy() for k, v in params.items()}
            best.best_epoch = epoch
            best.best_val_srcc = val_srcc
            stale_epochs = 0
        else:
            stale_epochs += 1
        if stale_epochs >= cfg.early_stop_patience:
            break

    if best.best_epoch == 0:
        warnings.warn(
            "validation system-level SRCC was degenerate in every epoch; returning final parameters",
            stacklevel=2,
        )
        best.params = params
    return best


def sign(residuals: np.ndarray) -> np.ndarray:
    """L1 subgradient of the residuals: sign, with 0 at zero residual."""
    return np.sign(residuals)
