"""Deterministic amplitude+phase spectral features.

Per frame: log-amplitude spectrum in dB relative to the per-utterance
peak (floored at -80 dB) concatenated with the instantaneous phase in
(-pi, pi]. Framing matches the pitch tracker exactly, so sequences from
the two extractors align frame for frame.
"""

from __future__ import annotations

import numpy as np

from .audio import AudioClip
from .featureio import FeatureSequence
from .pitch import DEFAULT_FRAME_SHIFT, hop_samples

AMPLITUDE_FLOOR_DB = -80.0


def stft_amplitude_phase(
    clip: AudioClip,
    frame_shift: float = DEFAULT_FRAME_SHIFT,
    fft_size: int = 1024,
) -> FeatureSequence:
    """Hann-windowed STFT with window length 2 * frame_shift (50% overlap).

    Output dims = fft_size + 2: fft_size/2 + 1 log-amplitude values
    followed by fft_size/2 + 1 phase values per frame.
    """
    if fft_size < 64 or fft_size & (fft_size - 1) != 0:
        raise ValueError(f"fft_size must be a power of two >= 64, got {fft_size}")
    sr = clip.sample_rate
    hop = hop_samples(sr, frame_shift)
    window = 2 * hop
    if fft_size < window:
        raise ValueError(
            f"fft_size {fft_size} is shorter than the {window}-sample analysis window "
            f"(2 * frame_shift at {sr} Hz)"
        )
    samples = clip.samples
    if samples.size < window:
        raise ValueError(
            f"clip too short: {samples.size} samples but one {window}-sample window is needed"
        )

    n_frames = samples.size // hop + 1
    padded = np.concatenate([np.zeros(hop), samples, np.zeros(window)])
    idx = np.arange(n_frames)[:, None] * hop + np.arange(window)[None, :]
    frames = padded[idx] * np.hanning(window)[None, :]

    spectra = np.fft.rfft(frames, n=fft_size, axis=1)
    magnitude = np.abs(spectra)
    peak = float(magnitude.max())
    if peak > 0.0:
        with np.errstate(divide="ignore"):
            log_amp = 20.0 * np.log10(magnitude / peak)
        log_amp = np.maximum(log_amp, AMPLITUDE_FLOOR_DB)
    else:
        log_amp = np.full_like(magnitude, AMPLITUDE_FLOOR_DB)
    phase = np.angle(spectra)
    phase = np.where(phase <= -np.pi, np.pi, phase)  # keep the range half-open at -pi

    data = np.concatenate([log_amp, phase], axis=1)
    return FeatureSequence(data=data, frame_shift=frame_shift, kind="spectral")
