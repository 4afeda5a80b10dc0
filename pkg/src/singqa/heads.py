"""Trainable scoring heads over assembled utterance features.

Four variants share one linear output layer trained with mini-batch SGD
on mean L1 loss; the pitch_histogram variant adds a learned layer-norm
affine and the spectrum variant adds a learned projection of the
spectral block, both optimized jointly with the output layer.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .assembly import VARIANTS
from .training import TrainConfig, run_sgd, sign

MOS_MIN = 1.0
MOS_MAX = 5.0

AUX_DIMS = {"plain": 0, "compressed_pitch": 2, "pitch_histogram": 120}


def clamp_score(score):
    """Clip scores to the 5-point scale for reporting."""
    return np.clip(score, MOS_MIN, MOS_MAX)


class HeadPredictor(RegressorMixin, BaseEstimator):
    """Linear MOS-scoring head with SRCC-checkpointed SGD training.

    Parameters mirror the training defaults (lr 1e-4, batch 4, up to 1000
    epochs, patience 15) and are deterministic given ``seed``.
    ``embedding_dim`` is required for the spectrum variant so the input
    matrix can be split into embedding and spectral blocks.
    """

    def __init__(
        self,
        variant="plain",
        embedding_dim=None,
        projection_dim=64,
        use_layer_norm=True,
        learning_rate=0.0001,
        batch_size=4,
        max_epochs=1000,
        patience=15,
        seed=0,
    ):
        self.variant = variant
        self.embedding_dim = embedding_dim
        self.projection_dim = projection_dim
        self.use_layer_norm = use_layer_norm
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed

    # -- internals ---------------------------------------------------------

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            early_stop_patience=self.patience,
            seed=self.seed,
        )

    def _has_affine(self) -> bool:
        return self.variant == "pitch_histogram" and self.use_layer_norm

    def _transform(self, params: dict, X: np.ndarray) -> np.ndarray:
        if self.variant == "spectrum":
            d = self.embedding_dim
            return np.hstack([X[:, :d], X[:, d:] @ params["projection"].T])
        if self._has_affine():
            return X * params["scale"] + params["offset"]
        return X

    def _predict(self, params: dict, X: np.ndarray) -> np.ndarray:
        return self._transform(params, X) @ params["w"] + params["b"]

    def _grad(self, params: dict, Xb: np.ndarray, yb: np.ndarray) -> dict:
        V = self._transform(params, Xb)
        s = sign(V @ params["w"] + params["b"] - yb) / yb.size
        grads = {"w": V.T @ s, "b": np.array(s.sum())}
        if self._has_affine():
            grads["scale"] = params["w"] * (Xb.T @ s)
            grads["offset"] = params["w"] * s.sum()
        elif self.variant == "spectrum":
            d = self.embedding_dim
            w_aux = params["w"][d:]
            grads["projection"] = np.outer(w_aux, Xb[:, d:].T @ s)
        return grads

    def _init_params(self, n_features: int, y: np.ndarray, rng: np.random.Generator) -> dict:
        if self.variant == "spectrum":
            raw_aux = n_features - self.embedding_dim
            d_model = self.embedding_dim + self.projection_dim
        else:
            d_model = n_features
        limit = 1.0 / np.sqrt(d_model)
        params = {
            "w": rng.uniform(-limit, limit, size=d_model),
            "b": np.array(float(np.median(y))),
        }
        if self._has_affine():
            params["scale"] = np.ones(n_features)
            params["offset"] = np.zeros(n_features)
        elif self.variant == "spectrum":
            lim_p = 1.0 / np.sqrt(raw_aux)
            params["projection"] = rng.uniform(-lim_p, lim_p, size=(self.projection_dim, raw_aux))
        return params

    def _validate(self, X: np.ndarray) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.variant == "spectrum":
            if self.embedding_dim is None:
                raise ValueError("the spectrum variant needs embedding_dim to split its input")
            if not (0 < self.embedding_dim < X.shape[1]):
                raise ValueError(
                    f"embedding_dim {self.embedding_dim} leaves no spectral block "
                    f"in a {X.shape[1]}-wide input"
                )
            if self.projection_dim < 1:
                raise ValueError("projection_dim must be positive")

    # -- estimator API -----------------------------------------------------

    def fit(self, X, y, X_val=None, y_val=None, val_systems=None):
        """Train on (X, y); checkpoint on validation system-level SRCC.

        The validation split is required and must cover at least two
        systems, otherwise rank correlation is undefined.
        """
        X = check_array(X, dtype=np.float64)
        y = column_or_1d(y).astype(np.float64)
        if y.size != X.shape[0]:
            raise ValueError(f"{X.shape[0]} rows but {y.size} labels")
        if y.size == 0:
            raise ValueError("training split must be non-empty")
        if X_val is None or y_val is None or val_systems is None:
            raise ValueError("fit requires X_val, y_val and val_systems for SRCC checkpointing")
        X_val = check_array(X_val, dtype=np.float64)
        y_val = column_or_1d(y_val).astype(np.float64)
        self._validate(X)
        if X_val.shape[1] != X.shape[1]:
            raise ValueError(f"validation width {X_val.shape[1]} != training width {X.shape[1]}")
        aux_dim = AUX_DIMS.get(self.variant, self.projection_dim)
        if self.variant == "spectrum":
            embedding_dim = int(self.embedding_dim)
        else:
            embedding_dim = X.shape[1] - aux_dim
            if self.embedding_dim is not None and self.embedding_dim != embedding_dim:
                raise ValueError(
                    f"embedding_dim {self.embedding_dim} inconsistent with input width "
                    f"{X.shape[1]} for variant {self.variant!r} (aux {aux_dim})"
                )
            if embedding_dim < 1:
                raise ValueError(
                    f"input width {X.shape[1]} too small for variant {self.variant!r} (needs > {aux_dim})"
                )

        rng = np.random.default_rng(self.seed)
        result = run_sgd(
            self._init_params(X.shape[1], y, rng),
            self._grad,
            self._predict,
            X, y, X_val, y_val, val_systems,
            self._train_config(),
            rng,
        )

        params = result.params
        self.weights_ = params["w"]
        self.bias_ = float(params["b"])
        self.norm_scale_ = params.get("scale")
        self.norm_offset_ = params.get("offset")
        self.projection_ = params.get("projection")
        self.n_features_in_ = X.shape[1]
        self.aux_dim_ = aux_dim
        self.embedding_dim_ = embedding_dim
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.best_val_srcc_ = result.best_val_srcc
        return self

    def _fitted_params(self) -> dict:
        params = {"w": self.weights_, "b": self.bias_}
        if self.norm_scale_ is not None:
            params["scale"] = self.norm_scale_
            params["offset"] = self.norm_offset_
        if self.projection_ is not None:
            params["projection"] = self.projection_
        return params

    def transform(self, X) -> np.ndarray:
        """The feature vectors the output layer (and any bias branch) sees."""
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} input dims, got {X.shape[1]}")
        return self._transform(self._fitted_params(), X)

    def predict(self, X) -> np.ndarray:
        """Raw (unclamped) scores: dot(weights, transform(x)) + bias."""
        return self.transform(X) @ self.weights_ + self.bias_
