"""Turn per-utterance feature sequences into fixed-length head inputs.

Variants:
  plain             mean-pooled embedding
  compressed_pitch  mean pool of [embedding frame || folded pitch / 120 || voiced flag]
  pitch_histogram   [mean-pooled embedding || 120-bin histogram], layer-normalized
  spectrum          [mean-pooled embedding || mean-pooled spectral frame]; the
                    trained head projects the spectral block down to its
                    auxiliary width (mean pooling commutes with that linear map)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .featureio import FeatureSequence
from .pitch import BINS_PER_OCTAVE, PitchTrack, compute_histogram, fold_to_octave, hz_to_cent

VARIANTS = ("plain", "compressed_pitch", "pitch_histogram", "spectrum")

LAYER_NORM_EPS = 1e-5
_FRAME_SHIFT_TOLERANCE = 0.01
_LENGTH_TOLERANCE = 2


@dataclass(frozen=True)
class UtteranceInputs:
    """The loaded per-utterance inputs a variant may need."""

    embedding: FeatureSequence
    pitch: PitchTrack | None = None
    spectral: FeatureSequence | None = None


def mean_pool(seq) -> np.ndarray:
    """Per-dimension arithmetic mean over frames."""
    data = seq.data if isinstance(seq, FeatureSequence) else np.asarray(seq, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 1:
        raise ValueError("mean_pool needs a non-empty frames x dims matrix")
    return data.mean(axis=0, dtype=np.float64)


def layer_normalize(v, scale=None, offset=None) -> np.ndarray:
    """Standardize a vector to zero mean / unit variance, then apply the
    optional per-dimension affine. Population variance, eps = 1e-5."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise ValueError("layer_normalize needs a 1-D vector with at least 2 dims")
    z = (v - v.mean()) / np.sqrt(v.var() + LAYER_NORM_EPS)
    if scale is not None:
        z = z * np.asarray(scale, dtype=np.float64)
    if offset is not None:
        z = z + np.asarray(offset, dtype=np.float64)
    return z


def align_frames(emb: FeatureSequence, aux: FeatureSequence):
    """Reconcile two sequences that should share a time base.

    Frame shifts must agree within 1%; length differences of at most two
    frames are truncated to the shorter sequence, anything larger is an
    error.
    """
    if abs(emb.frame_shift - aux.frame_shift) > _FRAME_SHIFT_TOLERANCE * max(emb.frame_shift, aux.frame_shift):
        raise ValueError(
            f"frame shifts differ by more than 1%: {emb.frame_shift} vs {aux.frame_shift}"
        )
    diff = abs(emb.frames - aux.frames)
    if diff > _LENGTH_TOLERANCE:
        raise ValueError(
            f"frame counts differ by {diff} (> {_LENGTH_TOLERANCE}): {emb.frames} vs {aux.frames}"
        )
    if diff == 0:
        return emb, aux
    n = min(emb.frames, aux.frames)
    trim = lambda s: FeatureSequence(data=s.data[:n], frame_shift=s.frame_shift, kind=s.kind)
    return trim(emb), trim(aux)


def pitch_channels(track: PitchTrack) -> FeatureSequence:
    """Per-frame auxiliary channels: folded pitch scaled to [0, 1) and a
    0/1 voicing flag (0 pitch value on unvoiced frames)."""
    coord = np.zeros(track.frames)
    if track.voiced.any():
        coord[track.voiced] = fold_to_octave(hz_to_cent(track.f0_hz[track.voiced])) / BINS_PER_OCTAVE
    data = np.column_stack([coord, track.voiced.astype(np.float64)])
    return FeatureSequence(data=data, frame_shift=track.frame_shift, kind="pitch")


def assemble_features(
    inputs: UtteranceInputs,
    variant: str,
    *,
    histogram_norm: str = "voiced",
    use_layer_norm: bool = True,
    norm_scale=None,
    norm_offset=None,
    projection=None,
) -> np.ndarray:
    """Build one utterance-level feature vector for the given variant.

    For ``spectrum``, pass ``projection`` to apply the learned per-frame
    projection here; without it the raw pooled spectral block is returned
    and the head applies its projection itself (same result, since mean
    pooling commutes with a linear map).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    emb = inputs.embedding
    if emb is None:
        raise ValueError("an embedding sequence is required")

    if variant == "plain":
        return mean_pool(emb)

    if variant == "compressed_pitch":
        if inputs.pitch is None:
            raise ValueError("compressed_pitch assembly needs a pitch track")
        emb_a, aux_a = align_frames(emb, pitch_channels(inputs.pitch))
        stacked = np.hstack([emb_a.data.astype(np.float64), aux_a.data.astype(np.float64)])
        return mean_pool(stacked)

    if variant == "pitch_histogram":
        if inputs.pitch is None:
            raise ValueError("pitch_histogram assembly needs a pitch track")
        hist = compute_histogram(inputs.pitch, normalizer=histogram_norm)
        concat = np.concatenate([mean_pool(emb), hist.bins])
        if use_layer_norm:
            return layer_normalize(concat, scale=norm_scale, offset=norm_offset)
        return concat

    if inputs.spectral is None:
        raise ValueError("spectrum assembly needs a spectral sequence")
    emb_a, spec_a = align_frames(emb, inputs.spectral)
    if projection is not None:
        proj = np.asarray(projection, dtype=np.float64)
        stacked = np.hstack([emb_a.data.astype(np.float64), spec_a.data.astype(np.float64) @ proj.T])
        return mean_pool(stacked)
    return np.concatenate([mean_pool(emb_a), mean_pool(spec_a)])


class FeatureAssembler(TransformerMixin, BaseEstimator):
    """Stateless transformer from UtteranceInputs lists to feature matrices."""

    def __init__(self, variant="plain", histogram_norm="voiced", use_layer_norm=True):
        self.variant = variant
        self.histogram_norm = histogram_norm
        self.use_layer_norm = use_layer_norm

    def fit(self, X, y=None):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        return self

    def transform(self, X) -> np.ndarray:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        rows = [
            assemble_features(
                inputs,
                self.variant,
                histogram_norm=self.histogram_norm,
                use_layer_norm=self.use_layer_norm,
            )
            for inputs in X
        ]
        if not rows:
            raise ValueError("no utterances to assemble")
        widths = {row.size for row in rows}
        if len(widths) != 1:
            raise ValueError(f"inconsistent feature widths across utterances: {sorted(widths)}")
        return np.vstack(rows)
