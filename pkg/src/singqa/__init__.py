"""Singing-quality MOS scoring toolkit.

Feature extraction (pitch histograms, amplitude+phase spectra) over wav
files, four trainable linear scoring heads on top of precomputed
frame-level embeddings, piecewise bias correction, SRCC-ranked score
fusion and the utterance/system-level evaluation protocol.
"""

from .assembly import (
    FeatureAssembler,
    UtteranceInputs,
    align_frames,
    assemble_features,
    layer_normalize,
    mean_pool,
)
from .audio import AudioClip, WavFormatError, read_wav, write_wav
from .bias import BiasCorrector, SegmentMse, apply_bias, segment_mse, write_segment_csv
from .featureio import FeatureFormatError, FeatureSequence, read_feature_file, write_feature_file
from .fusion import FusionModel, ScoreCombiner, fuse_forward, rank_predictors
from .heads import HeadPredictor, clamp_score
from .manifest import ManifestError, UtteranceRecord, load_manifest, write_manifest
from .metrics import (
    LevelMetrics,
    MetricReport,
    format_report_table,
    full_report,
    ktau,
    lcc,
    mse,
    srcc,
    system_aggregate,
    write_report_csv,
)
from .modelio import (
    ModelFormatError,
    file_digest,
    load_model,
    save_corrected_head,
    save_fusion,
    save_head,
    verify_members,
    write_training_log,
)
from .pitch import (
    PitchHistogram,
    PitchTrack,
    compute_histogram,
    features_to_pitch_track,
    fold_to_octave,
    histogram_sharpness,
    hz_to_cent,
    pitch_track_to_features,
    track_pitch,
)
from .spectral import stft_amplitude_phase
from .training import TrainConfig, system_level_srcc

__all__ = [
    "AudioClip",
    "BiasCorrector",
    "FeatureAssembler",
    "FeatureFormatError",
    "FeatureSequence",
    "FusionModel",
    "HeadPredictor",
    "LevelMetrics",
    "ManifestError",
    "MetricReport",
    "ModelFormatError",
    "PitchHistogram",
    "PitchTrack",
    "ScoreCombiner",
    "SegmentMse",
    "TrainConfig",
    "UtteranceInputs",
    "UtteranceRecord",
    "WavFormatError",
    "align_frames",
    "apply_bias",
    "assemble_features",
    "clamp_score",
    "compute_histogram",
    "features_to_pitch_track",
    "file_digest",
    "fold_to_octave",
    "format_report_table",
    "full_report",
    "fuse_forward",
    "histogram_sharpness",
    "hz_to_cent",
    "ktau",
    "layer_normalize",
    "lcc",
    "load_manifest",
    "load_model",
    "mean_pool",
    "mse",
    "pitch_track_to_features",
    "rank_predictors",
    "read_feature_file",
    "read_wav",
    "save_corrected_head",
    "save_fusion",
    "save_head",
    "segment_mse",
    "srcc",
    "stft_amplitude_phase",
    "system_aggregate",
    "system_level_srcc",
    "track_pitch",
    "verify_members",
    "write_feature_file",
    "write_manifest",
    "write_report_csv",
    "write_segment_csv",
    "write_training_log",
    "write_wav",
]
