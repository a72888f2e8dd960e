"""Turn selected examples plus a test utterance into model conditioning.

Encoder side: example audio concatenated ahead of the test audio. Decoder
side: example labels joined by a delimiter as a forced prefix, plus an
optional prompt. If the concatenation would exceed the backend window,
examples are dropped farthest-first until it fits; the test utterance is
never dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .audio import Waveform, concat_audio, duration_seconds, load_wav, standardize
from .backend import ControlSequence
from .datastore import Example
from .errors import MissingAudio, TestTooLong

ORDER_MODES = ("far_to_near", "near_to_far", "random")

DEFAULT_DELIMITER = "。"
DEFAULT_PROMPT = "识别方言"


@dataclass(frozen=True)
class ContextConfig:
    """Knobs for one assembly: example count, presentation order, decoder
    text shape, and the audio window budget."""

    k: int = 0
    order_mode: str = "far_to_near"
    order_seed: int | None = None
    delimiter: str = DEFAULT_DELIMITER
    prompt_text: str | None = DEFAULT_PROMPT
    gap_seconds: float = 0.0
    max_window_seconds: float = 30.0
    language: str | None = None
    no_timestamps: bool = True
    trailing_delimiter: bool = True

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.max_window_seconds <= 0:
            raise ValueError("max_window_seconds must be positive")
        if self.order_mode not in ORDER_MODES:
            raise ValueError(f"order_mode must be one of {ORDER_MODES}")


@dataclass(frozen=True)
class AssembledInput:
    audio: Waveform
    prefix_text: str
    control: ControlSequence
    used_examples: tuple[str, ...]
    dropped_examples: tuple[str, ...]


def order_examples(
    selected: Sequence[tuple[Example, float]],
    mode: str,
    seed: int | None = None,
) -> list[Example]:
    """Arrange kNN output (ascending distance) into presentation order.

    far_to_near reverses the selection order, near_to_far keeps it, random
    applies a seeded Fisher-Yates shuffle (numpy RandomState, so the
    permutation is reproducible across platforms).
    """
    if mode == "near_to_far":
        return [e for e, _ in selected]
    if mode == "far_to_near":
        return [e for e, _ in reversed(selected)]
    if mode == "random":
        perm = np.random.RandomState(seed).permutation(len(selected))
        return [selected[i][0] for i in perm]
    raise ValueError(f"unknown order mode {mode!r}")


def default_audio_provider(path: str) -> Waveform:
    try:
        return standardize(load_wav(path))
    except OSError as exc:
        raise MissingAudio(f"{path}: {exc}") from exc


def build_control(cfg: ContextConfig, prefix_text: str) -> ControlSequence:
    """Control sequence for one call; empty strings normalize to absent."""
    return ControlSequence(
        language=cfg.language or None,
        task="transcribe",
        no_timestamps=cfg.no_timestamps,
        prompt_text=cfg.prompt_text or None,
        prefix_text=prefix_text or None,
    )


def assemble(
    ordered: Sequence[Example],
    test: Waveform,
    cfg: ContextConfig,
    distances: Mapping[str, float] | None = None,
    audio_provider: Callable[[str], Waveform] = default_audio_provider,
) -> AssembledInput:
    """Build the concatenated audio and delimiter-joined label prefix.

    ``distances`` (example id -> selection distance) drives overflow
    dropping; without it the farthest example is inferred from
    cfg.order_mode, which is impossible for random order.

    Raises:
        TestTooLong: the test utterance alone exceeds the budget.
        MissingAudio: an example's audio cannot be loaded.
    """
    if duration_seconds(test) > cfg.max_window_seconds:
        raise TestTooLong(
            f"test utterance {duration_seconds(test):.2f} s exceeds "
            f"{cfg.max_window_seconds:.2f} s budget"
        )
    ordered = list(ordered)
    waves = {e.id: audio_provider(e.audio_path) for e in ordered}
    gap_samples = round(cfg.gap_seconds * test.sample_rate)
    budget_samples = cfg.max_window_seconds * test.sample_rate

    def fits(examples: Sequence[Example]) -> bool:
        total = sum(len(waves[e.id]) for e in examples) + len(test)
        total += gap_samples * len(examples)
        return total <= budget_samples

    kept = list(ordered)
    dropped: list[str] = []
    if not fits(kept):
        for victim in _drop_order(ordered, cfg, distances):
            if fits(kept):
                break
            kept.remove(victim)
            dropped.append(victim.id)

    audio = concat_audio([waves[e.id] for e in kept] + [test], cfg.gap_seconds)
    labels = [e.label for e in kept]
    prefix = cfg.delimiter.join(labels)
    if labels and cfg.trailing_delimiter:
        prefix += cfg.delimiter
    return AssembledInput(
        audio=audio,
        prefix_text=prefix,
        control=build_control(cfg, prefix),
        used_examples=tuple(e.id for e in kept),
        dropped_examples=tuple(dropped),
    )


def _drop_order(
    ordered: Sequence[Example],
    cfg: ContextConfig,
    distances: Mapping[str, float] | None,
) -> list[Example]:
    """Examples in the order they may be sacrificed: farthest first."""
    if not ordered:
        return []
    if distances is not None:
        return sorted(ordered, key=lambda e: (distances[e.id], e.id), reverse=True)
    if cfg.order_mode == "far_to_near":
        return list(ordered)
    if cfg.order_mode == "near_to_far":
        return list(reversed(ordered))
    raise ValueError("distances required to resolve overflow under random order")
