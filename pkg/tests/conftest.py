import numpy as np
import pytest

from singqa import AudioClip, FeatureSequence, PitchTrack


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def sine_clip(freq_hz, duration=1.0, sample_rate=16000, amplitude=0.5):
    t = np.arange(int(duration * sample_rate)) / sample_rate
    return AudioClip(samples=amplitude * np.sin(2 * np.pi * freq_hz * t), sample_rate=sample_rate)


def make_track(f0_values, frame_shift=0.02):
    """Track from raw f0 values; zeros mean unvoiced."""
    f0 = np.asarray(f0_values, dtype=np.float64)
    return PitchTrack(f0_hz=f0, voiced=f0 > 0, frame_shift=frame_shift)


def random_embedding(rng, frames, dims, frame_shift=0.02):
    return FeatureSequence(
        data=rng.normal(size=(frames, dims)).astype(np.float32),
        frame_shift=frame_shift,
        kind="embedding",
    )


def fitted_plain_head(weights, bias):
    """Hand-assembled plain head, bypassing training."""
    from singqa import HeadPredictor

    weights = np.asarray(weights, dtype=np.float64)
    head = HeadPredictor(variant="plain")
    head.weights_ = weights
    head.bias_ = float(bias)
    head.norm_scale_ = None
    head.norm_offset_ = None
    head.projection_ = None
    head.n_features_in_ = weights.size
    head.embedding_dim_ = weights.size
    head.aux_dim_ = 0
    head.history_ = []
    head.best_epoch_ = 1
    head.best_val_srcc_ = 1.0
    return head
