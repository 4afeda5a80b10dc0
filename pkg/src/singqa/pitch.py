"""Frame-level pitch tracking and the octave-folded pitch histogram.

Pitch values are converted from Hz to cents relative to A4 = 440 Hz
(1200 cents per octave), folded into a single octave of 120 bins of
10 cents each, and counted into a normalized histogram. Sharp histogram
peaks indicate consistently hit notes; an entropy-based sharpness score
quantifies this.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioClip
from .featureio import FeatureSequence

BASE_FREQ_HZ = 440.0
CENTS_PER_OCTAVE = 1200.0
BINS_PER_OCTAVE = 120
DEFAULT_FRAME_SHIFT = 0.02

_WINDOW_SEC = 0.040
_VOICING_THRESHOLD = 0.3
_PEAK_PICK_RATIO = 0.9


@dataclass(frozen=True)
class PitchTrack:
    """Per-frame f0 estimates in Hz (0 where unvoiced) with voicing flags."""

    f0_hz: np.ndarray
    voiced: np.ndarray
    frame_shift: float

    def __post_init__(self):
        f0 = np.asarray(self.f0_hz, dtype=np.float64)
        voiced = np.asarray(self.voiced, dtype=bool)
        if f0.ndim != 1 or voiced.ndim != 1 or f0.size != voiced.size or f0.size < 1:
            raise ValueError("f0_hz and voiced must be equal-length 1-D vectors with length >= 1")
        if not np.all(np.isfinite(f0)):
            raise ValueError("f0_hz must be finite")
        if np.any(f0[voiced] <= 0.0):
            raise ValueError("voiced frames must have f0 > 0")
        if np.any(f0[~voiced] != 0.0):
            raise ValueError("unvoiced frames must have f0 == 0")
        if not (float(self.frame_shift) > 0.0):
            raise ValueError(f"frame_shift must be positive, got {self.frame_shift}")
        for name, arr in (("f0_hz", f0), ("voiced", voiced)):
            if arr.flags.writeable:
                arr = arr.copy()
                arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "frame_shift", float(self.frame_shift))

    @property
    def frames(self) -> int:
        return self.f0_hz.size


@dataclass(frozen=True)
class PitchHistogram:
    """120-bin octave-folded pitch distribution."""

    bins: np.ndarray
    voiced_frames: int
    total_frames: int

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.float64)
        if bins.shape != (BINS_PER_OCTAVE,):
            raise ValueError(f"bins must have shape ({BINS_PER_OCTAVE},), got {bins.shape}")
        if np.any(bins < 0.0):
            raise ValueError("bins must be non-negative")
        if bins.flags.writeable:
            bins = bins.copy()
            bins.setflags(write=False)
        object.__setattr__(self, "bins", bins)


def hz_to_cent(f_hz):
    """1200 * log2(f / 440). Accepts a scalar or array; input must be > 0."""
    f = np.asarray(f_hz, dtype=np.float64)
    if not np.all(np.isfinite(f)) or np.any(f <= 0.0):
        raise ValueError("frequencies must be finite and positive")
    cents = CENTS_PER_OCTAVE * np.log2(f / BASE_FREQ_HZ)
    return float(cents) if np.ndim(f_hz) == 0 else cents


def fold_to_octave(f_cent):
    """Map cents to the octave-folded bin coordinate (f_cent / 10) mod 120.

    Floored modulo, so the result is in [0, 120) for negative cents too.
    """
    c = np.asarray(f_cent, dtype=np.float64)
    if not np.all(np.isfinite(c)):
        raise ValueError("cent values must be finite")
    folded = np.mod(c / 10.0, float(BINS_PER_OCTAVE))
    # float rounding can land exactly on the modulus for tiny negative inputs
    folded = np.where(folded >= BINS_PER_OCTAVE, folded - BINS_PER_OCTAVE, folded)
    return float(folded) if np.ndim(f_cent) == 0 else folded


def compute_histogram(track: PitchTrack, normalizer: str = "voiced") -> PitchHistogram:
    """Count voiced frames per 10-cent bin and normalize.

    Bin j (1-indexed) holds frames whose folded coordinate lies in
    [j-1, j). ``normalizer`` picks the denominator: the voiced-frame
    count (default, histograms sum to 1 when any frame is voiced) or the
    total frame count.
    """
    if normalizer not in ("voiced", "all"):
        raise ValueError(f"normalizer must be 'voiced' or 'all', got {normalizer!r}")
    voiced_f0 = track.f0_hz[track.voiced]
    counts = np.zeros(BINS_PER_OCTAVE, dtype=np.int64)
    if voiced_f0.size:
        coords = fold_to_octave(hz_to_cent(voiced_f0))
        counts = np.bincount(np.floor(coords).astype(np.int64), minlength=BINS_PER_OCTAVE)
    n_voiced = int(voiced_f0.size)
    denom = n_voiced if normalizer == "voiced" else track.frames
    bins = counts / denom if denom > 0 else np.zeros(BINS_PER_OCTAVE)
    return PitchHistogram(bins=bins, voiced_frames=n_voiced, total_frames=track.frames)


def histogram_sharpness(hist: PitchHistogram) -> float:
    """Negative Shannon entropy of the bin distribution (higher = sharper).

    Zero-probability bins contribute nothing; a one-hot histogram scores 0
    and the uniform histogram scores -log(120). Bins are renormalized by
    their sum, so "all"-normalized histograms are accepted.
    """
    total = float(hist.bins.sum())
    if total <= 0.0:
        raise ValueError("sharpness is undefined for an all-zero histogram")
    p = hist.bins / total
    nz = p[p > 0.0]
    return float(np.sum(nz * np.log(nz)))


def frame_count(n_samples: int, sample_rate: int, frame_shift: float) -> int:
    """Shared framing contract: floor(duration / frame_shift) + 1 frames."""
    hop = hop_samples(sample_rate, frame_shift)
    return n_samples // hop + 1


def hop_samples(sample_rate: int, frame_shift: float) -> int:
    hop = int(round(frame_shift * sample_rate))
    if hop < 1:
        raise ValueError(f"frame_shift {frame_shift} is below one sample at {sample_rate} Hz")
    return hop


def track_pitch(
    clip: AudioClip,
    frame_shift: float = DEFAULT_FRAME_SHIFT,
    f0_min: float = 60.0,
    f0_max: float = 800.0,
) -> PitchTrack:
    """Normalized-autocorrelation pitch tracker.

    40 ms analysis windows centered on each frame time, mean-removed,
    correlated against themselves; the clarity of the best peak gates
    voicing at 0.3 and parabolic interpolation refines the lag. Among
    near-maximal peaks the smallest lag wins, which avoids octave-low
    errors on clean tones.
    """
    sr = clip.sample_rate
    if not (0.0 < f0_min < f0_max < sr / 2.0):
        raise ValueError(f"need 0 < f0_min < f0_max < sample_rate/2, got [{f0_min}, {f0_max}] at {sr} Hz")
    window = int(round(_WINDOW_SEC * sr))
    samples = clip.samples
    if samples.size < window:
        raise ValueError(
            f"clip too short: {samples.size} samples but one {window}-sample analysis window is needed"
        )
    hop = hop_samples(sr, frame_shift)
    lag_min = max(2, int(np.floor(sr / f0_max)))
    lag_max = int(np.ceil(sr / f0_min))
    if lag_max > window // 2:
        raise ValueError(
            f"f0_min {f0_min} Hz needs lags beyond half the {window}-sample window; raise f0_min"
        )
    if lag_min >= lag_max:
        raise ValueError(f"pitch range [{f0_min}, {f0_max}] collapses at {sr} Hz")

    n_frames = samples.size // hop + 1
    half = window // 2
    padded = np.concatenate([np.zeros(half), samples, np.zeros(window)])
    idx = np.arange(n_frames)[:, None] * hop + np.arange(window)[None, :]
    frames = padded[idx]
    frames = frames - frames.mean(axis=1, keepdims=True)

    nfft = 1 << int(np.ceil(np.log2(2 * window)))
    spectra = np.fft.rfft(frames, n=nfft, axis=1)
    autocorr = np.fft.irfft(spectra * np.conj(spectra), n=nfft, axis=1)[:, :window]

    sq = frames * frames
    csum = np.cumsum(sq, axis=1)
    energy = csum[:, -1]

    lags = np.arange(lag_min, lag_max + 1)
    # overlap energies for each lag: head = sum x[0:W-tau]^2, tail = sum x[tau:W]^2
    head = csum[:, window - lags - 1]
    tail = energy[:, None] - csum[:, lags - 1]
    denom = np.sqrt(head * tail)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(denom > 0.0, autocorr[:, lag_min:lag_max + 1] / denom, 0.0)

    f0_hz = np.zeros(n_frames)
    voiced = np.zeros(n_frames, dtype=bool)
    for n in range(n_frames):
        if energy[n] <= 0.0:
            continue
        r = corr[n]
        best = float(r.max())
        if best < _VOICING_THRESHOLD:
            continue
        interior = np.arange(1, r.size - 1)
        is_peak = (r[interior] >= r[interior - 1]) & (r[interior] > r[interior + 1])
        peaks = interior[is_peak & (r[interior] >= _PEAK_PICK_RATIO * best)]
        k = int(peaks[0]) if peaks.size else int(np.argmax(r))
        lag = float(lags[k])
        if 0 < k < r.size - 1:
            a, b, c = r[k - 1], r[k], r[k + 1]
            curv = a - 2.0 * b + c
            if curv < 0.0:
                delta = 0.5 * (a - c) / curv
                if -1.0 < delta < 1.0:
                    lag += delta
        f0 = sr / lag
        f0_hz[n] = min(max(f0, f0_min), f0_max)
        voiced[n] = True

    return PitchTrack(f0_hz=f0_hz, voiced=voiced, frame_shift=frame_shift)


def pitch_track_to_features(track: PitchTrack) -> FeatureSequence:
    """Pack a track as an SQAF-compatible sequence (columns: f0_hz, voiced)."""
    data = np.column_stack([track.f0_hz, track.voiced.astype(np.float64)])
    return FeatureSequence(data=data, frame_shift=track.frame_shift, kind="pitch")


def features_to_pitch_track(seq: FeatureSequence) -> PitchTrack:
    if seq.kind != "pitch" or seq.dims != 2:
        raise ValueError(f"expected a 2-column 'pitch' sequence, got kind={seq.kind!r} dims={seq.dims}")
    f0 = seq.data[:, 0].astype(np.float64)
    voiced = seq.data[:, 1] != 0.0
    return PitchTrack(f0_hz=f0, voiced=voiced, frame_shift=seq.frame_shift)
