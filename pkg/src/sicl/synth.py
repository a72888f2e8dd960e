"""Deterministic synthetic tone-word corpus for the mock backend.

The vocabulary is the mock backend's tone words. Each embedding bin behaves
as one word with a standard form and a dialect variant form; a configurable
fraction of the test items carry the variant form as their reference, and
the datastore labels all same-bin examples with that same form. With that
construction the no-context error rate equals the variant fraction exactly,
and retrieval of matching-bin examples repairs every variant item.

Tones 1500 Hz and 1900 Hz share an embedding bin, so they are treated as
homophones: variant status is assigned per bin, never per tone, keeping
datastore labels consistent with what retrieval can distinguish.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import write_wav
from .backend import DEFAULT_LABEL_TABLE, TONE_FREQUENCIES, make_tone, tone_bin
from .errors import ConfigError


@dataclass(frozen=True)
class SynthSpec:
    """Corpus shape: test item count, tone slots, variant fraction, speaker
    count, RNG seed, and datastore examples per tone slot."""

    words: int = 200
    bins: int = 8
    variant_fraction: float = 0.5
    speakers: int = 4
    seed: int = 0
    examples_per_word: int = 2

    def __post_init__(self):
        if not (1 <= self.bins <= len(TONE_FREQUENCIES)):
            raise ConfigError(f"bins must be in 1..{len(TONE_FREQUENCIES)}")
        if self.words < 1 or self.speakers < 1 or self.examples_per_word < 1:
            raise ConfigError("words, speakers, examples_per_word must be >= 1")
        if not (0.0 <= self.variant_fraction <= 1.0):
            raise ConfigError("variant_fraction must be in [0, 1]")

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthSpec":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**obj)


@dataclass(frozen=True)
class SynthCorpus:
    test_manifest: Path
    datastore_manifest: Path
    wav_dir: Path
    variant_test_items: int


def _choose_variant_bins(spec: SynthSpec, items_per_bin: dict[int, int]) -> set[int]:
    """Pick embedding bins whose test items are variant-form.

    Chooses among the subsets whose item counts sum exactly to
    round(variant_fraction * words) with a seeded RNG; if no exact subset
    exists, takes the closest (smallest absolute miss, stable tie-break).
    """
    target = round(spec.variant_fraction * spec.words)
    bins = sorted(items_per_bin)
    best_miss = None
    candidates: list[tuple[int, ...]] = []
    for r in range(len(bins) + 1):
        for subset in itertools.combinations(bins, r):
            miss = abs(sum(items_per_bin[b] for b in subset) - target)
            if best_miss is None or miss < best_miss:
                best_miss = miss
                candidates = [subset]
            elif miss == best_miss:
                candidates.append(subset)
    rng = np.random.RandomState(spec.seed)
    return set(candidates[rng.randint(len(candidates))])


def make_synthetic_corpus(spec: SynthSpec, out_dir: str | Path) -> SynthCorpus:
    """Write WAV fixtures plus test and datastore manifests under out_dir.

    Byte-identical output for identical specs: the WAVs depend only on the
    tone table, and all assignments derive from the seed.
    """
    out = Path(out_dir)
    wav_dir = out / "wavs"
    wav_dir.mkdir(parents=True, exist_ok=True)

    tones = TONE_FREQUENCIES[:spec.bins]
    wav_names = {}
    for f in tones:
        name = f"tone_{f:04d}.wav"
        write_wav(wav_dir / name, make_tone(f))
        wav_names[f] = f"wavs/{name}"

    # test items round-robin over tone slots
    item_tones = [tones[i % len(tones)] for i in range(spec.words)]
    items_per_bin: dict[int, int] = {}
    for f in item_tones:
        items_per_bin[tone_bin(f)] = items_per_bin.get(tone_bin(f), 0) + 1
    variant_bins = _choose_variant_bins(spec, items_per_bin)

    def form(freq: int) -> str:
        b = tone_bin(freq)
        default, variant = DEFAULT_LABEL_TABLE[b]
        return variant if b in variant_bins else default

    test_path = out / "test_manifest.jsonl"
    variant_items = 0
    with open(test_path, "w", encoding="utf-8") as f:
        for i, freq in enumerate(item_tones):
            label = form(freq)
            if tone_bin(freq) in variant_bins:
                variant_items += 1
            f.write(json.dumps({
                "id": f"test-{i:04d}",
                "audio": wav_names[freq],
                "label": label,
                "speaker": f"spk{i % spec.speakers}",
                "dialect": "synth",
            }, ensure_ascii=False) + "\n")

    store_path = out / "datastore_manifest.jsonl"
    with open(store_path, "w", encoding="utf-8") as f:
        n = 0
        for slot, freq in enumerate(tones):
            for j in range(spec.examples_per_word):
                f.write(json.dumps({
                    "id": f"ctx-{slot}-{j}",
                    "audio": wav_names[freq],
                    "label": form(freq),
                    "speaker": f"spk{n % spec.speakers}",
                    "dialect": "synth",
                }, ensure_ascii=False) + "\n")
                n += 1

    return SynthCorpus(test_path, store_path, wav_dir, variant_items)
