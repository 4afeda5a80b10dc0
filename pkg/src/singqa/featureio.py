"""SQAF binary feature files and the in-memory feature-sequence type.

SQAF layout (little-endian): magic ``SQAF``, version byte, kind byte
(0 embedding, 1 spectral, 2 pitch), float64 frame shift in seconds,
uint32 frames, uint32 dims, then frames*dims float32 values in row-major
order. The payload is float32, so FeatureSequence keeps its data as
float32 and write-then-read is the bit-exact identity.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"SQAF"
FORMAT_VERSION = 1

KIND_CODES = {"embedding": 0, "spectral": 1, "pitch": 2}
KIND_NAMES = {code: name for name, code in KIND_CODES.items()}

_HEADER = struct.Struct("<4sBBdII")


class FeatureFormatError(ValueError):
    """A file does not match the SQAF layout."""


@dataclass(frozen=True)
class FeatureSequence:
    """A frames x dims matrix of frame-level features with its frame shift."""

    data: np.ndarray
    frame_shift: float
    kind: str = "embedding"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 2:
            raise ValueError(f"feature data must be 2-D (frames x dims), got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"feature data needs frames >= 1 and dims >= 1, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("feature data must be finite")
        if not (float(self.frame_shift) > 0.0):
            raise ValueError(f"frame_shift must be positive, got {self.frame_shift}")
        if self.kind not in KIND_CODES:
            raise ValueError(f"unknown feature kind {self.kind!r}; expected one of {sorted(KIND_CODES)}")
        if data.flags.writeable:
            data = data.copy()
            data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "frame_shift", float(self.frame_shift))

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]


def write_feature_file(seq: FeatureSequence, path) -> None:
    """Serialize a FeatureSequence to an SQAF file."""
    path = Path(path)
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, KIND_CODES[seq.kind], seq.frame_shift, seq.frames, seq.dims
    )
    payload = np.ascontiguousarray(seq.data, dtype="<f4").tobytes()
    path.write_bytes(header + payload)


def read_feature_file(path) -> FeatureSequence:
    """Parse an SQAF file, validating magic, header consistency and finiteness."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise FeatureFormatError(f"{path}: file shorter than the SQAF header ({len(blob)} bytes)")
    magic, version, kind_code, frame_shift, frames, dims = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FeatureFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FeatureFormatError(f"{path}: unsupported format version {version}")
    if kind_code not in KIND_NAMES:
        raise FeatureFormatError(f"{path}: unknown kind code {kind_code}")
    if frames < 1 or dims < 1:
        raise FeatureFormatError(f"{path}: header declares empty matrix {frames}x{dims}")
    if not (np.isfinite(frame_shift) and frame_shift > 0.0):
        raise FeatureFormatError(f"{path}: invalid frame shift {frame_shift}")
    payload = blob[_HEADER.size:]
    expected = frames * dims * 4
    if len(payload) != expected:
        raise FeatureFormatError(
            f"{path}: header declares {frames}x{dims} ({expected} payload bytes) "
            f"but {len(payload)} bytes follow"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(frames, dims)
    if not np.all(np.isfinite(data)):
        raise FeatureFormatError(f"{path}: payload contains non-finite values")
    return FeatureSequence(data=data, frame_shift=frame_shift, kind=KIND_NAMES[kind_code])
