"""ASR backend contract plus the deterministic mock backend.

A backend exposes two operations: ``encode`` (audio to an embedding frame
sequence, used for example retrieval) and ``transcribe`` (audio plus a
control sequence to text). The retrieval backend and the inference backend
are just two handles with this contract; they may or may not be the same
model.

The mock backend is fully specified and deterministic so that retrieval,
assembly, scoring, and the harness can be exercised offline. Its corpus
items are pure sine "tone words"; its transcription rule emits a dialect
variant form exactly when that form appears in the decoder prefix, which
reproduces the adaptation phenomenon end to end.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field

import numpy as np

from .audio import STANDARD_RATE, Waveform, duration_seconds
from .errors import AudioTooLong

MOCK_DIM = 8
MOCK_FRAME_HOP_SECONDS = 0.02
MOCK_SILENCE_RMS = 1e-4
MOCK_SPLIT_SILENCE_SECONDS = 0.05

#: Frequencies (Hz) of the mock corpus tone words: 0.5 s sines at amplitude 0.5.
TONE_FREQUENCIES = (300, 700, 1100, 1500, 1900, 2300, 2700, 3100)
TONE_DURATION_SECONDS = 0.5
TONE_AMPLITUDE = 0.5

#: Default label forms per embedding bin: (standard form, dialect variant form).
DEFAULT_LABEL_TABLE = {
    0: ("零", "洞"),
    1: ("一", "幺"),
    2: ("二", "两"),
    3: ("三", "仨"),
    4: ("四", "肆"),
    5: ("五", "伍"),
    6: ("六", "陆"),
    7: ("七", "柒"),
}


@dataclass(frozen=True)
class EmbeddingSequence:
    """Encoder output: frames (T x D), hop seconds, and the count of frames
    that cover actual audio (the rest is padding, if the backend pads)."""

    frames: np.ndarray
    frame_hop_seconds: float
    audio_frames: int

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 2:
            raise ValueError("frames must be a T x D matrix")
        if not (1 <= self.audio_frames <= frames.shape[0]):
            raise ValueError("audio_frames must satisfy 1 <= audio_frames <= T")
        if not np.all(np.isfinite(frames)):
            raise ValueError("frames contain non-finite entries")
        object.__setattr__(self, "frames", frames)

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class ControlSequence:
    """Decoder-side conditioning: language id, prompt (prior context) and
    prefix (forced transcript start). Tokenization is owned by the backend."""

    language: str | None = None
    task: str = "transcribe"
    no_timestamps: bool = True
    prompt_text: str | None = None
    prefix_text: str | None = None


@dataclass(frozen=True)
class Transcript:
    """Backend output: continuation text only (the forced prefix is never
    echoed back) plus the control sequence the backend actually applied."""

    text: str
    applied_control: ControlSequence


class Backend(abc.ABC):
    """Contract shared by the mock backend and remote protocol clients."""

    #: identifies the model behind this handle (stored in datastores)
    tag: str = ""
    sample_rate: int = STANDARD_RATE
    window_seconds: float = 30.0

    @abc.abstractmethod
    def encode(self, w: Waveform) -> EmbeddingSequence:
        """Embed standardized audio into a frame sequence."""

    @abc.abstractmethod
    def transcribe(self, w: Waveform, control: ControlSequence) -> Transcript:
        """Decode standardized audio under the given control sequence."""

    def _check_input(self, w: Waveform) -> None:
        if w.sample_rate != self.sample_rate:
            raise ValueError(
                f"backend expects {self.sample_rate} Hz audio, got {w.sample_rate} Hz"
            )
        if duration_seconds(w) > self.window_seconds:
            raise AudioTooLong(
                f"{duration_seconds(w):.2f} s exceeds the {self.window_seconds:.0f} s window"
            )


def make_tone(frequency: float, duration: float = TONE_DURATION_SECONDS,
              amplitude: float = TONE_AMPLITUDE, rate: int = STANDARD_RATE) -> Waveform:
    """Synthesize a pure sine tone word."""
    t = np.arange(round(duration * rate)) / rate
    return Waveform((amplitude * np.sin(2 * np.pi * frequency * t)).astype(np.float32), rate)


def tone_bin(frequency: float) -> int:
    """Embedding bin a pure tone of this frequency lands in."""
    return min(max(int(math.floor(MOCK_DIM * frequency / 4000.0)), 0), MOCK_DIM - 1)


def _dominant_frequency(samples: np.ndarray, rate: int) -> float:
    spectrum = np.abs(np.fft.rfft(samples.astype(np.float64)))
    return float(np.argmax(spectrum) * rate / len(samples))


@dataclass
class MockBackend(Backend):
    """Deterministic stand-in backend over the tone-word corpus.

    encode: one frame per 20 ms, D = 8. Each frame is one-hot at
    clamp(floor(8 * f_dom / 4000), 0, 7) where f_dom is the dominant DFT
    frequency of that window, or all-zero when the window RMS < 1e-4.

    transcribe: split the input on runs of >= 0.05 s of exact zeros, take the
    trailing segment, compute its bin b, then emit the variant form for b if
    it occurs in the prefix text and the default form otherwise.
    """

    label_table: dict[int, tuple[str, str]] = field(
        default_factory=lambda: dict(DEFAULT_LABEL_TABLE)
    )
    tag: str = "mock"

    def encode(self, w: Waveform) -> EmbeddingSequence:
        self._check_input(w)
        hop = round(MOCK_FRAME_HOP_SECONDS * self.sample_rate)
        n_frames = math.ceil(len(w.samples) / hop)
        frames = np.zeros((n_frames, MOCK_DIM), dtype=np.float32)
        for i in range(n_frames):
            window = w.samples[i * hop:(i + 1) * hop]
            if math.sqrt(float(np.mean(window.astype(np.float64) ** 2))) < MOCK_SILENCE_RMS:
                continue
            frames[i, tone_bin(_dominant_frequency(window, self.sample_rate))] = 1.0
        return EmbeddingSequence(frames, MOCK_FRAME_HOP_SECONDS, n_frames)

    def transcribe(self, w: Waveform, control: ControlSequence) -> Transcript:
        self._check_input(w)
        segment = self._trailing_segment(w.samples)
        if segment.size == 0:
            return Transcript("", control)
        b = tone_bin(_dominant_frequency(segment, self.sample_rate))
        default, variant = self.label_table.get(b, (f"<bin{b}>", f"<bin{b}*>"))
        prefix = control.prefix_text or ""
        return Transcript(variant if variant in prefix else default, control)

    def _trailing_segment(self, samples: np.ndarray) -> np.ndarray:
        min_run = round(MOCK_SPLIT_SILENCE_SECONDS * self.sample_rate)
        nonzero = np.flatnonzero(samples != 0.0)
        if nonzero.size == 0:
            return np.empty(0, dtype=samples.dtype)
        # a gap of > min_run between consecutive nonzero samples means a run
        # of >= min_run exact zeros; the trailing segment starts after the
        # last such run
        gaps = np.flatnonzero(np.diff(nonzero) > min_run)
        start = int(nonzero[gaps[-1] + 1]) if gaps.size else int(nonzero[0])
        return samples[start:int(nonzero[-1]) + 1]
