"""Structured text serialization for trained models.

Weights are written with ``repr`` (shortest exact round-trip decimal),
so a serialize/deserialize cycle reproduces forward outputs bit for bit
and repeated runs produce byte-identical files. Bias-correction branches
live in a versioned optional section appended to the head file; fusion
files pin their members by sha256 digest so stale member/combiner
pairings fail at load.
"""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np

from .bias import BiasCorrector
from .fusion import FusionModel
from .heads import HeadPredictor

FILE_TAG = "singqa-model 1"
BIAS_SECTION_TAG = "bias_correction 1"
TRAINING_LOG_COLUMNS = ["epoch", "train_l1", "val_srcc_system"]


class ModelFormatError(ValueError):
    pass


def _floats(values) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(values, dtype=np.float64).ravel())


def _parse_floats(text: str) -> np.ndarray:
    return np.array([float(tok) for tok in text.split()], dtype=np.float64)


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _head_lines(head: HeadPredictor, histogram_norm: str) -> list[str]:
    lines = [
        FILE_TAG,
        "kind: head",
        f"variant: {head.variant}",
        f"embedding_dim: {head.embedding_dim_}",
        f"aux_dim: {head.aux_dim_}",
        f"n_features_in: {head.n_features_in_}",
        f"use_layer_norm: {'true' if head.use_layer_norm else 'false'}",
        f"histogram_norm: {histogram_norm}",
        f"seed: {head.seed}",
        f"best_epoch: {head.best_epoch_}",
        f"best_val_srcc: {repr(float(head.best_val_srcc_))}",
        f"weights: {_floats(head.weights_)}",
        f"bias: {repr(float(head.bias_))}",
    ]
    if head.norm_scale_ is not None:
        lines.append(f"norm_scale: {_floats(head.norm_scale_)}")
        lines.append(f"norm_offset: {_floats(head.norm_offset_)}")
    if head.projection_ is not None:
        rows, cols = head.projection_.shape
        lines.append(f"projection_shape: {rows} {cols}")
        lines.append(f"projection: {_floats(head.projection_)}")
    return lines


def save_head(head: HeadPredictor, path, histogram_norm: str = "voiced") -> None:
    Path(path).write_text("\n".join(_head_lines(head, histogram_norm)) + "\n", encoding="utf-8")


def save_corrected_head(corrector: BiasCorrector, path, histogram_norm: str = "voiced") -> None:
    lines = _head_lines(corrector.head, histogram_norm)
    lines += [
        f"section: {BIAS_SECTION_TAG}",
        f"alpha: {repr(float(corrector.alpha))}",
        f"beta: {repr(float(corrector.beta))}",
        f"add_weights: {_floats(corrector.add_weights_)}",
        f"add_bias: {repr(float(corrector.add_bias_))}",
        f"sub_weights: {_floats(corrector.sub_weights_)}",
        f"sub_bias: {repr(float(corrector.sub_bias_))}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_fusion(model: FusionModel, path) -> None:
    if not model.member_digests:
        raise ValueError("fusion files must carry member digests; build the model with them")
    lines = [FILE_TAG, "kind: fusion", f"members: {len(model.member_ids)}"]
    for member_id, digest in zip(model.member_ids, model.member_digests):
        lines.append(f"member_id: {member_id}")
        lines.append(f"member_digest: {digest}")
    lines.append(f"combiner_weights: {_floats(model.weights)}")
    lines.append(f"combiner_bias: {repr(float(model.bias))}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_sections(path) -> tuple[dict, dict, list[tuple[str, str]]]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != FILE_TAG:
        raise ModelFormatError(f"{path}: not a {FILE_TAG!r} file")
    main: dict[str, str] = {}
    section: dict[str, str] = {}
    ordered: list[tuple[str, str]] = []
    current = main
    for ln in lines[1:]:
        if ":" not in ln:
            raise ModelFormatError(f"{path}: malformed line {ln!r}")
        key, value = ln.split(":", 1)
        key, value = key.strip(), value.strip()
        if key == "section":
            if value != BIAS_SECTION_TAG:
                raise ModelFormatError(f"{path}: unknown section {value!r}")
            current = section
            continue
        if key in current:
            ordered.append((key, value))
        else:
            current[key] = value
            ordered.append((key, value))
    return main, section, ordered


def _require(mapping: dict, key: str, path) -> str:
    if key not in mapping:
        raise ModelFormatError(f"{path}: missing field {key!r}")
    return mapping[key]


def _load_head(main: dict, path) -> HeadPredictor:
    variant = _require(main, "variant", path)
    use_layer_norm = _require(main, "use_layer_norm", path) == "true"
    embedding_dim = int(_require(main, "embedding_dim", path))
    aux_dim = int(_require(main, "aux_dim", path))
    head = HeadPredictor(
        variant=variant,
        embedding_dim=embedding_dim if variant == "spectrum" else None,
        projection_dim=aux_dim if variant == "spectrum" else 64,
        use_layer_norm=use_layer_norm,
        seed=int(_require(main, "seed", path)),
    )
    head.weights_ = _parse_floats(_require(main, "weights", path))
    head.bias_ = float(_require(main, "bias", path))
    head.norm_scale_ = _parse_floats(main["norm_scale"]) if "norm_scale" in main else None
    head.norm_offset_ = _parse_floats(main["norm_offset"]) if "norm_offset" in main else None
    if "projection" in main:
        rows, cols = (int(t) for t in _require(main, "projection_shape", path).split())
        flat = _parse_floats(main["projection"])
        if flat.size != rows * cols:
            raise ModelFormatError(f"{path}: projection payload does not match its shape")
        head.projection_ = flat.reshape(rows, cols)
    else:
        head.projection_ = None
    head.n_features_in_ = int(_require(main, "n_features_in", path))
    head.embedding_dim_ = embedding_dim
    head.aux_dim_ = aux_dim
    head.best_epoch_ = int(_require(main, "best_epoch", path))
    head.best_val_srcc_ = float(_require(main, "best_val_srcc", path))
    head.history_ = []
    if head.weights_.size != embedding_dim + aux_dim:
        raise ModelFormatError(
            f"{path}: weight length {head.weights_.size} does not match "
            f"embedding_dim {embedding_dim} + aux_dim {aux_dim}"
        )
    return head


def load_model(path):
    """Load a model file.

    Returns (estimator, meta) where the estimator is a HeadPredictor, a
    BiasCorrector wrapping one, or a FusionModel, and meta carries the
    assembly settings ('kind', 'histogram_norm').
    """
    main, section, ordered = _parse_sections(path)
    kind = _require(main, "kind", path)
    if kind == "fusion":
        n_members = int(_require(main, "members", path))
        member_ids = [v for k, v in ordered if k == "member_id"]
        member_digests = [v for k, v in ordered if k == "member_digest"]
        if len(member_ids) != n_members or len(member_digests) != n_members:
            raise ModelFormatError(f"{path}: member list does not match declared count {n_members}")
        model = FusionModel(
            member_ids=tuple(member_ids),
            weights=_parse_floats(_require(main, "combiner_weights", path)),
            bias=float(_require(main, "combiner_bias", path)),
            member_digests=tuple(member_digests),
        )
        return model, {"kind": "fusion"}
    if kind != "head":
        raise ModelFormatError(f"{path}: unknown model kind {kind!r}")

    head = _load_head(main, path)
    meta = {"kind": "head", "histogram_norm": _require(main, "histogram_norm", path)}
    if not section:
        return head, meta
    corrector = BiasCorrector(
        head=head,
        alpha=float(_require(section, "alpha", path)),
        beta=float(_require(section, "beta", path)),
    )
    corrector.add_weights_ = _parse_floats(_require(section, "add_weights", path))
    corrector.add_bias_ = float(_require(section, "add_bias", path))
    corrector.sub_weights_ = _parse_floats(_require(section, "sub_weights", path))
    corrector.sub_bias_ = float(_require(section, "sub_bias", path))
    if corrector.add_weights_.size != head.weights_.size or corrector.sub_weights_.size != head.weights_.size:
        raise ModelFormatError(f"{path}: branch weight lengths do not match the head dimension")
    corrector.n_features_in_ = head.n_features_in_
    corrector.history_ = []
    meta["kind"] = "corrected_head"
    return corrector, meta


def verify_members(model: FusionModel, member_paths) -> None:
    """Check that member files still match the digests stored at fuse time."""
    member_paths = [Path(p) for p in member_paths]
    if len(member_paths) != len(model.member_ids):
        raise ValueError(
            f"fusion model has {len(model.member_ids)} members but {len(member_paths)} files given"
        )
    for pos, (expected, path) in enumerate(zip(model.member_digests, member_paths), start=1):
        actual = file_digest(path)
        if actual != expected:
            raise ValueError(
                f"member {pos} ({path.name}) does not match the digest recorded at fuse time; "
                "the fusion model is stale for this member"
            )


def write_training_log(history, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAINING_LOG_COLUMNS)
        for epoch, train_l1, val_srcc in history:
            writer.writerow([epoch, repr(float(train_l1)), repr(float(val_srcc))])
