import math

import numpy as np
import pytest

from singqa import (
    PitchHistogram,
    PitchTrack,
    compute_histogram,
    features_to_pitch_track,
    fold_to_octave,
    histogram_sharpness,
    hz_to_cent,
    pitch_track_to_features,
    read_feature_file,
    track_pitch,
    write_feature_file,
)

from conftest import make_track, sine_clip


def brute_force_bins(f0_values):
    """Frame-by-frame bin counting, independent of the library path."""
    counts = [0] * 120
    for f in f0_values:
        if f <= 0:
            continue
        cent = 1200.0 * math.log2(f / 440.0)
        coord = (cent / 10.0) % 120.0
        b = int(math.floor(coord))
        if b >= 120:  # defensive wrap for float rounding at the seam
            b = 0
        counts[b] += 1
    return counts


class TestCentConversion:
    def test_reference_points(self):
        assert hz_to_cent(440.0) == 0.0
        assert hz_to_cent(880.0) == pytest.approx(1200.0, abs=1e-9)
        assert hz_to_cent(220.0) == pytest.approx(-1200.0, abs=1e-9)
        # equal-tempered semitone above A4
        assert hz_to_cent(466.1637615) == pytest.approx(100.0, abs=1e-6)

    def test_rejects_nonpositive(self):
        for bad in (0.0, -5.0):
            with pytest.raises(ValueError):
                hz_to_cent(bad)

    def test_octave_additivity(self, rng):
        f = rng.uniform(20.0, 4000.0, 2000)
        delta = hz_to_cent(2.0 * f) - hz_to_cent(f)
        assert np.max(np.abs(delta - 1200.0)) < 1e-9


class TestOctaveFolding:
    def test_reference_points(self):
        assert fold_to_octave(0.0) == 0.0
        assert fold_to_octave(1250.0) == 5.0
        assert fold_to_octave(-50.0) == 115.0

    def test_range_and_periodicity(self, rng):
        c = rng.uniform(-30000.0, 30000.0, 5000)
        folded = fold_to_octave(c)
        assert np.all((folded >= 0.0) & (folded < 120.0))
        for k in (-3, -1, 1, 4):
            shifted = fold_to_octave(c + 1200.0 * k)
            d = np.abs(shifted - folded)
            assert np.max(np.minimum(d, 120.0 - d)) < 1e-9

    def test_rounding_seam_stays_in_range(self):
        assert fold_to_octave(-1e-14) == 0.0

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            fold_to_octave(float("inf"))


class TestHistogram:
    def test_single_note(self):
        hist = compute_histogram(make_track([440.0] * 10))
        assert hist.bins[0] == 1.0
        assert hist.bins[1:].sum() == 0.0

    def test_octave_folding_merges(self):
        hist = compute_histogram(make_track([440.0] * 5 + [880.0] * 5))
        assert hist.bins[0] == 1.0

    def test_uniform_coordinates(self, rng):
        coords = rng.uniform(0.0, 120.0, 12000)
        f0 = 440.0 * 2.0 ** (coords * 10.0 / 1200.0)
        hist = compute_histogram(make_track(f0))
        sigma = math.sqrt((1 / 120) * (119 / 120) / 12000)
        assert np.max(np.abs(hist.bins - 1 / 120)) < 3 * sigma
        assert hist.bins == pytest.approx(np.array(brute_force_bins(f0)) / 12000, abs=0)

    def test_matches_brute_force_exactly(self, rng):
        for _ in range(40):
            n = int(rng.integers(1, 200))
            f0 = rng.uniform(60.0, 1200.0, n)
            f0[rng.random(n) < 0.3] = 0.0
            hist = compute_histogram(make_track(f0))
            counts = np.array(brute_force_bins(f0), dtype=np.int64)
            voiced = int((f0 > 0).sum())
            if voiced:
                assert np.array_equal(hist.bins, counts / voiced)
            else:
                assert np.all(hist.bins == 0.0)

    def test_all_frames_normalizer(self):
        hist = compute_histogram(make_track([440.0, 440.0, 0.0, 0.0]), normalizer="all")
        assert hist.bins.sum() == pytest.approx(0.5)
        assert hist.voiced_frames == 2 and hist.total_frames == 4

    def test_no_voiced_frames(self):
        hist = compute_histogram(make_track([0.0, 0.0]))
        assert np.all(hist.bins == 0.0)

    def test_permutation_invariance(self, rng):
        f0 = rng.uniform(100.0, 900.0, 300)
        f0[rng.random(300) < 0.2] = 0.0
        base = compute_histogram(make_track(f0))
        shuffled = compute_histogram(make_track(rng.permutation(f0)))
        assert np.array_equal(base.bins, shuffled.bins)

    def test_sum_is_one_when_voiced(self, rng):
        for _ in range(30):
            f0 = rng.uniform(60.0, 2000.0, int(rng.integers(1, 50)))
            hist = compute_histogram(make_track(f0))
            assert hist.bins.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all((hist.bins >= 0.0) & (hist.bins <= 1.0))

    def test_bad_normalizer(self):
        with pytest.raises(ValueError):
            compute_histogram(make_track([440.0]), normalizer="sometimes")


class TestSharpness:
    def test_one_hot_is_zero(self):
        bins = np.zeros(120)
        bins[17] = 1.0
        assert histogram_sharpness(PitchHistogram(bins, 10, 10)) == 0.0

    def test_uniform_is_minus_log_120(self):
        bins = np.full(120, 1 / 120)
        assert histogram_sharpness(PitchHistogram(bins, 120, 120)) == pytest.approx(-math.log(120.0))

    def test_two_bin_mixture(self):
        bins = np.zeros(120)
        bins[3], bins[40] = 0.9, 0.1
        expected = 0.9 * math.log(0.9) + 0.1 * math.log(0.1)
        assert histogram_sharpness(PitchHistogram(bins, 10, 10)) == pytest.approx(expected, abs=1e-12)

    def test_ordering_one_hot_above_middle_above_uniform(self, rng):
        p = rng.dirichlet(np.ones(120) * 0.2)
        one_hot = np.zeros(120)
        one_hot[0] = 1.0
        s_hot = histogram_sharpness(PitchHistogram(one_hot, 1, 1))
        s_mid = histogram_sharpness(PitchHistogram(p, 100, 100))
        s_uni = histogram_sharpness(PitchHistogram(np.full(120, 1 / 120), 120, 120))
        assert s_hot > s_mid > s_uni

    def test_all_zero_errors(self):
        with pytest.raises(ValueError):
            histogram_sharpness(PitchHistogram(np.zeros(120), 0, 4))

    def test_in_tune_singer_sharper_than_wanderer(self, rng):
        semitones = np.array([0.0, 200.0, 400.0, 700.0, 900.0])
        for _ in range(10):
            cents_tuned = rng.choice(semitones, 400) + rng.uniform(-10, 10, 400)
            cents_wander = rng.uniform(0.0, 1200.0, 400)
            tuned = compute_histogram(make_track(440.0 * 2.0 ** (cents_tuned / 1200.0)))
            wander = compute_histogram(make_track(440.0 * 2.0 ** (cents_wander / 1200.0)))
            assert histogram_sharpness(tuned) > histogram_sharpness(wander)


class TestTracker:
    def test_sine_440(self):
        track = track_pitch(sine_clip(440.0), 0.02, 60.0, 800.0)
        assert track.frames == 51  # floor(1.0 / 0.02) + 1
        assert np.all(track.voiced)
        assert abs(np.median(track.f0_hz) - 440.0) < 2.0

    def test_sine_220_no_octave_error(self):
        track = track_pitch(sine_clip(220.0), 0.02, 60.0, 800.0)
        med = np.median(track.f0_hz[track.voiced])
        assert abs(med - 220.0) < 2.0

    def test_silence_unvoiced(self):
        clip = sine_clip(440.0, amplitude=0.0)
        track = track_pitch(clip)
        assert not track.voiced.any()
        assert np.all(track.f0_hz == 0.0)

    def test_estimates_stay_in_range(self):
        track = track_pitch(sine_clip(790.0), 0.02, 60.0, 800.0)
        voiced = track.f0_hz[track.voiced]
        assert np.all((voiced >= 60.0) & (voiced <= 800.0))

    def test_short_clip_errors(self):
        with pytest.raises(ValueError, match="too short"):
            track_pitch(sine_clip(440.0, duration=0.02))

    def test_invalid_range_errors(self):
        clip = sine_clip(440.0)
        with pytest.raises(ValueError):
            track_pitch(clip, 0.02, 500.0, 100.0)
        with pytest.raises(ValueError):
            track_pitch(clip, 0.02, 10.0, 800.0)  # needs lags beyond half the window

    def test_track_invariants(self):
        with pytest.raises(ValueError):
            PitchTrack(f0_hz=np.array([440.0]), voiced=np.array([False]), frame_shift=0.02)
        with pytest.raises(ValueError):
            PitchTrack(f0_hz=np.array([0.0]), voiced=np.array([True]), frame_shift=0.02)


def test_pitch_sqaf_round_trip(tmp_path, rng):
    f0 = rng.uniform(100, 700, 40)
    f0[rng.random(40) < 0.3] = 0.0
    track = make_track(f0)
    path = tmp_path / "t.pitch.sqaf"
    write_feature_file(pitch_track_to_features(track), path)
    seq = read_feature_file(path)
    assert seq.kind == "pitch" and seq.dims == 2
    back = features_to_pitch_track(seq)
    assert np.array_equal(back.voiced, track.voiced)
    assert np.array_equal(back.f0_hz, track.f0_hz.astype(np.float32).astype(np.float64))
