"""Waveform loading, resampling, and concatenation.

Everything downstream of this module sees mono float32 waveforms with
amplitudes in [-1, 1]. ``standardize`` brings audio to the 16 kHz rate
the backends expect.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import firwin, resample_poly

from .errors import MalformedWav, RateMismatch, UnsupportedEncoding

STANDARD_RATE = 16000

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class Waveform:
    """Mono audio: float32 samples in [-1, 1] plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float32)
        if samples.ndim != 1 or samples.size == 0:
            raise MalformedWav("waveform must be a non-empty 1-D array")
        if self.sample_rate <= 0:
            raise MalformedWav(f"invalid sample rate {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise MalformedWav("waveform contains non-finite samples")
        if samples.min() < -1.0 or samples.max() > 1.0:
            raise MalformedWav("waveform amplitudes outside [-1, 1]")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)


def duration_seconds(w: Waveform) -> float:
    """Length of ``w`` in seconds (sample count over rate)."""
    return len(w.samples) / w.sample_rate


def _read_chunks(data: bytes):
    """Yield (chunk id, payload) pairs from a RIFF body, validating sizes."""
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        payload_end = pos + 8 + size
        if payload_end > len(data):
            raise MalformedWav(f"chunk {cid!r} extends past end of file")
        yield cid, data[pos + 8:payload_end]
        pos = payload_end + (size & 1)  # chunks are word-aligned


def _parse_fmt(payload: bytes):
    if len(payload) < 16:
        raise MalformedWav("fmt chunk too short")
    fmt_tag, channels, rate, _byte_rate, _block_align, bits = struct.unpack_from(
        "<HHIIHH", payload, 0
    )
    if fmt_tag == _WAVE_FORMAT_EXTENSIBLE:
        # actual format is the first two bytes of the SubFormat GUID
        if len(payload) < 26:
            raise MalformedWav("extensible fmt chunk too short")
        (fmt_tag,) = struct.unpack_from("<H", payload, 24)
    return fmt_tag, channels, rate, bits


def _decode_samples(raw: bytes, fmt_tag: int, bits: int) -> np.ndarray:
    if fmt_tag == _WAVE_FORMAT_IEEE_FLOAT:
        if bits != 32:
            raise UnsupportedEncoding(f"{bits}-bit float WAV not supported")
        if len(raw) % 4:
            raise MalformedWav("float32 data size not a multiple of 4")
        x = np.frombuffer(raw, dtype="<f4").astype(np.float32)
        if not np.all(np.isfinite(x)):
            raise MalformedWav("float WAV contains non-finite samples")
        return np.clip(x, -1.0, 1.0)
    if fmt_tag != _WAVE_FORMAT_PCM:
        raise UnsupportedEncoding(f"compressed WAV format 0x{fmt_tag:04x} not supported")
    if bits == 16:
        if len(raw) % 2:
            raise MalformedWav("PCM16 data size not a multiple of 2")
        return (np.frombuffer(raw, dtype="<i2").astype(np.float32)) / 32768.0
    if bits == 24:
        if len(raw) % 3:
            raise MalformedWav("PCM24 data size not a multiple of 3")
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        x = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        x = np.where(x >= 1 << 23, x - (1 << 24), x)
        return x.astype(np.float32) / float(1 << 23)
    if bits == 32:
        if len(raw) % 4:
            raise MalformedWav("PCM32 data size not a multiple of 4")
        return (np.frombuffer(raw, dtype="<i4").astype(np.float64) / float(1 << 31)).astype(
            np.float32
        )
    raise UnsupportedEncoding(f"{bits}-bit PCM not supported")


def load_wav(path: str | Path) -> Waveform:
    """Read a RIFF/WAVE file into a mono Waveform.

    Supports PCM16/24/32 and 32-bit float, 1 or 2 channels. Stereo is
    averaged to mono; the file's sample rate is preserved (no implicit
    resampling, see ``standardize``).

    Raises:
        MalformedWav: bad header or truncated data.
        UnsupportedEncoding: compressed formats, other bit depths, >2 channels.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedWav(f"{path}: not a RIFF/WAVE file")

    fmt = None
    raw = None
    for cid, payload in _read_chunks(data):
        if cid == b"fmt " and fmt is None:
            fmt = _parse_fmt(payload)
        elif cid == b"data" and raw is None:
            raw = payload
    if fmt is None:
        raise MalformedWav(f"{path}: missing fmt chunk")
    if raw is None:
        raise MalformedWav(f"{path}: missing data chunk")

    fmt_tag, channels, rate, bits = fmt
    if rate <= 0:
        raise MalformedWav(f"{path}: invalid sample rate {rate}")
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"{path}: {channels} channels not supported")

    samples = _decode_samples(raw, fmt_tag, bits)
    if channels == 2:
        if len(samples) % 2:
            raise MalformedWav(f"{path}: stereo data with odd sample count")
        samples = samples.reshape(-1, 2).mean(axis=1).astype(np.float32)
    if samples.size == 0:
        raise MalformedWav(f"{path}: empty data chunk")
    return Waveform(samples, int(rate))


def write_wav(path: str | Path, w: Waveform, encoding: str = "pcm16") -> None:
    """Write a Waveform as a minimal RIFF/WAVE file (pcm16 or float32)."""
    if encoding == "pcm16":
        fmt_tag, bits = _WAVE_FORMAT_PCM, 16
        payload = (
            np.clip(np.round(w.samples.astype(np.float64) * 32767.0), -32768, 32767)
            .astype("<i2")
            .tobytes()
        )
    elif encoding == "float32":
        fmt_tag, bits = _WAVE_FORMAT_IEEE_FLOAT, 32
        payload = w.samples.astype("<f4").tobytes()
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    block_align = bits // 8
    fmt = struct.pack(
        "<HHIIHH", fmt_tag, 1, w.sample_rate, w.sample_rate * block_align, block_align, bits
    )
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", len(body)) + body)


def standardize(w: Waveform, target_rate: int = STANDARD_RATE) -> Waveform:
    """Resample to ``target_rate`` with a windowed-sinc polyphase filter.

    Kaiser window (beta 8.6), 16 sinc zero crossings per side. Output length
    is round(len * target / rate); amplitudes are clamped to [-1, 1] after
    filtering. Identity when the rate already matches.
    """
    if w.sample_rate == target_rate:
        return w
    g = math.gcd(target_rate, w.sample_rate)
    up, down = target_rate // g, w.sample_rate // g
    max_rate = max(up, down)
    half_len = 16 * max_rate
    taps = firwin(2 * half_len + 1, 1.0 / max_rate, window=("kaiser", 8.6))
    y = resample_poly(w.samples.astype(np.float64), up, down, window=taps)

    target_len = round(len(w.samples) * target_rate / w.sample_rate)
    if len(y) > target_len:
        y = y[:target_len]
    elif len(y) < target_len:
        y = np.concatenate([y, np.zeros(target_len - len(y))])
    return Waveform(np.clip(y, -1.0, 1.0).astype(np.float32), target_rate)


def concat_audio(parts: list[Waveform], gap_seconds: float = 0.0) -> Waveform:
    """Concatenate waveforms in order with exact-zero gaps between them.

    All parts must share one sample rate. The gap is round(gap_seconds * rate)
    samples long and is inserted between consecutive parts only.

    Raises:
        RateMismatch: parts disagree on sample rate.
    """
    if not parts:
        raise ValueError("concat_audio requires at least one part")
    if gap_seconds < 0:
        raise ValueError("gap_seconds must be non-negative")
    rate = parts[0].sample_rate
    for p in parts[1:]:
        if p.sample_rate != rate:
            raise RateMismatch(f"sample rates {rate} and {p.sample_rate} differ")
    if len(parts) == 1:
        return parts[0]
    gap = np.zeros(round(gap_seconds * rate), dtype=np.float32)
    pieces = []
    for i, p in enumerate(parts):
        if i:
            pieces.append(gap)
        pieces.append(p.samples)
    return Waveform(np.concatenate(pieces), rate)
