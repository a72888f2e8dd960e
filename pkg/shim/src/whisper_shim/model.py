"""Whisper model wrapper: encoder states and controlled greedy decoding.

One bundle owns the model, tokenizer, and feature extractor, loaded once.
Decoding is greedy (temperature 0) for determinism. The prompt goes in as
prior context before the start-of-transcript token; the prefix is forced
after the task and no-timestamps tokens, and only the continuation is
returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from transformers import (
    WhisperConfig,
    WhisperFeatureExtractor,
    WhisperForConditionalGeneration,
    WhisperTokenizer,
)

MODEL_TAGS = {
    "base": "openai/whisper-base",
    "small": "openai/whisper-small",
    "medium": "openai/whisper-medium",
    "large": "openai/whisper-large-v2",
}

SPECIAL_TOKENS = (
    "<|startoftranscript|>",
    "<|zh|>",
    "<|en|>",
    "<|transcribe|>",
    "<|translate|>",
    "<|startofprev|>",
    "<|nospeech|>",
    "<|notimestamps|>",
)


class ControlError(ValueError):
    """A control field the loaded model cannot honor."""


class AudioTooLongError(ValueError):
    """Input exceeds the model's input window."""


@dataclass
class ShimConfig:
    model: str = "base"  # size tag, "tiny-random", or a checkpoint path
    device: str = "cpu"
    port: int = 8000
    max_new_tokens: int = 128
    seed: int = 0  # tiny-random init only


class WhisperBundle:
    def __init__(self, model, tokenizer, feature_extractor, device="cpu",
                 max_new_tokens=128):
        self.model = model.to(device).eval()
        self.tokenizer = tokenizer
        self.feature_extractor = feature_extractor
        self.device = device
        self.max_new_tokens = max_new_tokens
        self.sample_rate = feature_extractor.sampling_rate
        self.window_seconds = float(feature_extractor.chunk_length)
        # encoder frames per window is fixed by the architecture, so the
        # hop is derived from the loaded config at runtime
        self.hop_seconds = self.window_seconds / model.config.max_source_positions
        self.dim = model.config.d_model
        self._eot = self._token_id("<|endoftext|>")
        self._sot = self._token_id("<|startoftranscript|>")

    def _token_id(self, token: str) -> int:
        tid = self.tokenizer.convert_tokens_to_ids(token)
        unk = self.tokenizer.convert_tokens_to_ids(self.tokenizer.unk_token)
        if tid is None or (token != self.tokenizer.unk_token and tid == unk):
            raise ControlError(f"model vocabulary lacks {token}")
        return tid

    def _features(self, audio: np.ndarray, sample_rate: int) -> torch.Tensor:
        if sample_rate != self.sample_rate:
            raise ControlError(
                f"audio must be {self.sample_rate} Hz, got {sample_rate}"
            )
        duration = len(audio) / sample_rate
        if duration > self.window_seconds:
            raise AudioTooLongError(
                f"{duration:.2f} s exceeds the {self.window_seconds:.0f} s window"
            )
        feats = self.feature_extractor(
            audio, sampling_rate=sample_rate, return_tensors="pt",
            padding="max_length",
        ).input_features
        return feats.to(self.device)

    def encode(self, audio: np.ndarray, sample_rate: int):
        """Encoder hidden states plus the frame count covering real audio."""
        feats = self._features(audio, sample_rate)
        with torch.no_grad():
            hidden = self.model.model.encoder(feats).last_hidden_state
        frames = hidden[0].cpu().numpy().astype(np.float32)
        duration = len(audio) / sample_rate
        audio_frames = min(
            max(1, math.ceil(duration / self.hop_seconds)), frames.shape[0]
        )
        return frames, audio_frames

    def _forced_ids(self, control: dict) -> tuple[list[int], int]:
        """Decoder input ids realizing the control sequence.

        Returns (ids, prefix_token_count) where the prefix tokens are the
        trailing prefix_token_count entries.
        """
        if control.get("task", "transcribe") != "transcribe":
            raise ControlError(f"unsupported task {control.get('task')!r}")
        ids: list[int] = []
        prompt = control.get("prompt")
        if prompt:
            ids.append(self._token_id("<|startofprev|>"))
            ids.extend(self.tokenizer.encode(prompt, add_special_tokens=False))
        ids.append(self._sot)
        language = control.get("language")
        if language:
            ids.append(self._token_id(f"<|{language}|>"))
        ids.append(self._token_id("<|transcribe|>"))
        if control.get("no_timestamps", True):
            ids.append(self._token_id("<|notimestamps|>"))
        prefix = control.get("prefix")
        prefix_ids = (
            self.tokenizer.encode(prefix, add_special_tokens=False) if prefix else []
        )
        return ids + prefix_ids, len(prefix_ids)

    def transcribe(self, audio: np.ndarray, sample_rate: int, control: dict) -> str:
        """Greedy decode; returns the continuation after the forced prefix."""
        feats = self._features(audio, sample_rate)
        forced, _ = self._forced_ids(control)
        budget = self.model.config.max_target_positions - len(forced) - 1
        max_new = max(0, min(self.max_new_tokens, budget))

        generated: list[int] = []
        with torch.no_grad():
            encoder_outputs = self.model.model.encoder(feats)
            out = self.model(
                encoder_outputs=encoder_outputs,
                decoder_input_ids=torch.tensor([forced], device=self.device),
                use_cache=True,
            )
            for _ in range(max_new):
                next_id = int(out.logits[0, -1].argmax())
                if next_id == self._eot:
                    break
                generated.append(next_id)
                out = self.model(
                    encoder_outputs=encoder_outputs,
                    decoder_input_ids=torch.tensor([[next_id]], device=self.device),
                    past_key_values=out.past_key_values,
                    use_cache=True,
                )
        text = self.tokenizer.decode(generated, skip_special_tokens=True).strip()
        prefix = (control.get("prefix") or "").strip()
        if prefix and text.startswith(prefix):
            text = text[len(prefix):].lstrip()
        return text


def load_bundle(cfg: ShimConfig) -> WhisperBundle:
    if cfg.model == "tiny-random":
        return tiny_bundle(seed=cfg.seed, device=cfg.device,
                           max_new_tokens=cfg.max_new_tokens)
    name = MODEL_TAGS.get(cfg.model, cfg.model)
    model = WhisperForConditionalGeneration.from_pretrained(name)
    tokenizer = WhisperTokenizer.from_pretrained(name)
    feature_extractor = WhisperFeatureExtractor.from_pretrained(name)
    return WhisperBundle(model, tokenizer, feature_extractor,
                         device=cfg.device, max_new_tokens=cfg.max_new_tokens)


def tiny_bundle(seed: int = 0, device: str = "cpu",
                max_new_tokens: int = 32) -> WhisperBundle:
    """Randomly initialized miniature Whisper for tests and offline dev.

    Byte-level vocabulary built in memory, so no checkpoint or network is
    needed. Deterministic for a fixed seed.
    """
    from tokenizers import pre_tokenizers

    alphabet = sorted(pre_tokenizers.ByteLevel.alphabet())
    vocab = {ch: i for i, ch in enumerate(alphabet)}
    vocab["<|endoftext|>"] = len(vocab)
    tokenizer = WhisperTokenizer(vocab=vocab, merges=[])
    tokenizer.add_special_tokens({"additional_special_tokens": list(SPECIAL_TOKENS)})

    eot = tokenizer.convert_tokens_to_ids("<|endoftext|>")
    sot = tokenizer.convert_tokens_to_ids("<|startoftranscript|>")
    config = WhisperConfig(
        vocab_size=len(tokenizer),
        d_model=32,
        encoder_layers=2, encoder_attention_heads=2,
        decoder_layers=2, decoder_attention_heads=2,
        encoder_ffn_dim=64, decoder_ffn_dim=64,
        num_mel_bins=80, max_source_positions=1500, max_target_positions=448,
        pad_token_id=eot, bos_token_id=eot, eos_token_id=eot,
        decoder_start_token_id=sot,
    )
    torch.manual_seed(seed)
    model = WhisperForConditionalGeneration(config)
    return WhisperBundle(model, tokenizer, WhisperFeatureExtractor(),
                         device=device, max_new_tokens=max_new_tokens)
