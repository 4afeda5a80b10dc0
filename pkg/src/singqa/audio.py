"""WAV ingestion: linear-PCM reading, stereo downmix, no resampling."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_PCM = 1
_IEEE_FLOAT = 3
_EXTENSIBLE = 0xFFFE


class WavFormatError(ValueError):
    """A file is not a supported linear-PCM WAV."""


@dataclass(frozen=True)
class AudioClip:
    """Mono audio samples in [-1, 1] plus the sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D vector")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if samples.flags.writeable:
            samples = samples.copy()
            samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def _chunks(blob: bytes, path: Path):
    pos = 12
    while pos + 8 <= len(blob):
        cid = blob[pos:pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body = blob[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise WavFormatError(f"{path}: truncated {cid!r} chunk ({len(body)} of {size} bytes)")
        yield cid, body
        pos += 8 + size + (size & 1)  # chunks are word-aligned


def read_wav(path) -> AudioClip:
    """Read a 16-bit PCM or 32-bit float WAV (1 or 2 channels) as mono.

    Stereo is downmixed by channel average; 16-bit samples are scaled by
    1/32768. The sample rate is preserved, never resampled.
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    for cid, body in _chunks(blob, path):
        if cid == b"fmt " and fmt is None:
            if len(body) < 16:
                raise WavFormatError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body)
            if fmt[0] == _EXTENSIBLE:
                if len(body) < 26:
                    raise WavFormatError(f"{path}: extensible fmt chunk too short")
                (sub_format,) = struct.unpack_from("<H", body, 24)
                fmt = (sub_format,) + fmt[1:]
        elif cid == b"data" and data is None:
            data = body
    if fmt is None:
        raise WavFormatError(f"{path}: missing fmt chunk")
    if data is None:
        raise WavFormatError(f"{path}: missing data chunk")

    audio_format, channels, sample_rate, _byte_rate, block_align, bits = fmt
    if channels not in (1, 2):
        raise WavFormatError(f"{path}: unsupported channel count {channels}")
    if (audio_format, bits) == (_PCM, 16):
        sample_width = 2
        decode = lambda raw: np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif (audio_format, bits) == (_IEEE_FLOAT, 32):
        sample_width = 4
        decode = lambda raw: np.frombuffer(raw, dtype="<f4").astype(np.float64)
    else:
        raise WavFormatError(
            f"{path}: unsupported codec (format tag {audio_format}, {bits}-bit); "
            "only 16-bit PCM and 32-bit float are supported"
        )
    frame_size = sample_width * channels
    if block_align not in (0, frame_size):
        raise WavFormatError(f"{path}: block alignment {block_align} does not match format")
    if len(data) == 0:
        raise WavFormatError(f"{path}: empty data chunk")
    if len(data) % frame_size != 0:
        raise WavFormatError(
            f"{path}: truncated data chunk ({len(data)} bytes is not a whole number of frames)"
        )

    samples = decode(data)
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    if not np.all(np.isfinite(samples)):
        raise WavFormatError(f"{path}: non-finite sample values")
    return AudioClip(samples=samples, sample_rate=sample_rate)


def write_wav(path, samples, sample_rate: int, encoding: str = "pcm16") -> None:
    """Write a mono or stereo WAV; handy for tests and demos."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        channels = 1
    elif samples.ndim == 2 and samples.shape[1] in (1, 2):
        channels = samples.shape[1]
    else:
        raise ValueError(f"samples must be (n,) or (n, 1|2), got shape {samples.shape}")
    if encoding == "pcm16":
        audio_format, bits = _PCM, 16
        ints = np.clip(np.rint(samples * 32768.0), -32768, 32767)
        payload = ints.astype("<i2").tobytes()
    elif encoding == "float32":
        audio_format, bits = _IEEE_FLOAT, 32
        payload = samples.astype("<f4").tobytes()
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    block_align = channels * bits // 8
    byte_rate = sample_rate * block_align
    fmt = struct.pack("<HHIIHH", audio_format, channels, int(sample_rate), byte_rate, block_align, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
