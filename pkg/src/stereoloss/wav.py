"""Minimal RIFF/WAVE reader and writer.

Supports PCM 16-bit, PCM 24-bit, and IEEE float32 (plus float64 on read),
any channel count.  Error messages name the byte offset of the offending
structure so malformed files are diagnosable.
"""

from __future__ import annotations

import struct

import numpy as np

from .signal import StereoSignal

_PCM = 1
_IEEE_FLOAT = 3
_EXTENSIBLE = 0xFFFE


class WavFormatError(Exception):
    """Malformed or unsupported WAV data."""


class MonoInputError(Exception):
    """Single-channel file where stereo is required."""


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a WAV file into float64 samples shaped (N, channels) in [-1, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12:
        raise WavFormatError(f"file too short for a RIFF header at offset 0 ({len(data)} bytes)")
    if data[0:4] != b"RIFF":
        raise WavFormatError("missing 'RIFF' tag at offset 0")
    if data[8:12] != b"WAVE":
        raise WavFormatError("missing 'WAVE' tag at offset 8")

    fmt = None
    fmt_offset = None
    raw = None
    offset = 12
    while offset + 8 <= len(data):
        chunk_id = data[offset : offset + 4]
        (chunk_len,) = struct.unpack_from("<I", data, offset + 4)
        body = offset + 8
        if body + chunk_len > len(data):
            raise WavFormatError(
                f"chunk {chunk_id!r} at offset {offset} claims {chunk_len} bytes "
                f"but only {len(data) - body} remain"
            )
        if chunk_id == b"fmt ":
            if chunk_len < 16:
                raise WavFormatError(f"truncated 'fmt ' chunk at offset {offset}")
            fmt = struct.unpack_from("<HHIIHH", data, body)
            fmt_offset = offset
            if fmt[0] == _EXTENSIBLE:
                if chunk_len < 40:
                    raise WavFormatError(f"truncated extensible 'fmt ' chunk at offset {offset}")
                (sub,) = struct.unpack_from("<H", data, body + 24)
                fmt = (sub,) + fmt[1:]
        elif chunk_id == b"data":
            raw = data[body : body + chunk_len]
        # chunks are word-aligned
        offset = body + chunk_len + (chunk_len & 1)

    if fmt is None:
        raise WavFormatError("no 'fmt ' chunk found")
    if raw is None:
        raise WavFormatError("no 'data' chunk found")

    code, channels, sample_rate, _, block_align, bits = fmt
    if channels < 1:
        raise WavFormatError(f"invalid channel count {channels} in 'fmt ' chunk at offset {fmt_offset}")
    if code == _PCM and bits == 16:
        samples = np.frombuffer(raw[: len(raw) - len(raw) % 2], dtype="<i2").astype(np.float64)
        samples /= 32768.0
    elif code == _PCM and bits == 24:
        usable = len(raw) - len(raw) % 3
        b = np.frombuffer(raw[:usable], dtype=np.uint8).reshape(-1, 3)
        ints = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        samples = ints.astype(np.float64) / 8388608.0
    elif code == _IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(raw[: len(raw) - len(raw) % 4], dtype="<f4").astype(np.float64)
    elif code == _IEEE_FLOAT and bits == 64:
        samples = np.frombuffer(raw[: len(raw) - len(raw) % 8], dtype="<f8").astype(np.float64)
    else:
        raise WavFormatError(
            f"unsupported format (code {code}, {bits}-bit) in 'fmt ' chunk at offset {fmt_offset}"
        )

    frames = samples.shape[0] // channels
    return samples[: frames * channels].reshape(frames, channels), sample_rate


def write_wav(path, samples: np.ndarray, sample_rate: int, encoding: str = "float32") -> None:
    """Write float samples shaped (N,) or (N, channels) as a WAV file.

    encoding: "pcm16", "pcm24", or "float32".
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    channels = samples.shape[1]

    if encoding == "pcm16":
        code, bits = _PCM, 16
        clipped = np.clip(samples, -1.0, 32767.0 / 32768.0)
        payload = (np.round(clipped * 32768.0).astype("<i2")).tobytes()
    elif encoding == "pcm24":
        code, bits = _PCM, 24
        clipped = np.clip(samples, -1.0, 8388607.0 / 8388608.0)
        ints = np.round(clipped * 8388608.0).astype(np.int32).reshape(-1)
        b = np.empty((ints.shape[0], 3), dtype=np.uint8)
        b[:, 0] = ints & 0xFF
        b[:, 1] = (ints >> 8) & 0xFF
        b[:, 2] = (ints >> 16) & 0xFF
        payload = b.tobytes()
    elif encoding == "float32":
        code, bits = _IEEE_FLOAT, 32
        payload = samples.astype("<f4").tobytes()
    else:
        raise ValueError(f"unknown encoding {encoding!r}")

    block_align = channels * bits // 8
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + len(payload)),
            b"WAVE",
            b"fmt ",
            struct.pack("<IHHIIHH", 16, code, channels, sample_rate,
                        sample_rate * block_align, block_align, bits),
            b"data",
            struct.pack("<I", len(payload)),
        ]
    )
    with open(path, "wb") as fh:
        fh.write(header + payload)


def read_stereo(path, upmix: bool = False) -> StereoSignal:
    """Read a WAV file as a StereoSignal.

    Mono files are refused unless ``upmix`` is set, in which case the single
    channel is duplicated.
    """
    samples, rate = read_wav(path)
    if samples.shape[1] == 1:
        if not upmix:
            raise MonoInputError(
                f"{path} is mono; pass --upmix to duplicate the channel into stereo"
            )
        samples = np.repeat(samples, 2, axis=1)
    elif samples.shape[1] != 2:
        raise WavFormatError(f"{path} has {samples.shape[1]} channels, expected 2")
    return StereoSignal(samples, rate)


def write_stereo(path, x: StereoSignal, encoding: str = "float32") -> None:
    write_wav(path, x.samples, x.sample_rate, encoding)
