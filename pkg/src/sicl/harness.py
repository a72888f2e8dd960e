"""End-to-end experiment driver.

A run sweeps k values, presentation orders, and (for random selection)
trials over one test manifest and one datastore, producing a result table
with one corpus WER per cell plus per-utterance audit logs. Datastore
variants control which examples each test utterance may draw:

* ``same_speaker_same_dialect``: the test speaker's own examples.
* ``nearest_speaker_same_dialect``: the Euclidean-nearest other speaker in
  the test dialect, with same-label examples excluded.
* ``same_speaker_other_corpus``: the test speaker's examples from a second
  datastore (for example read speech instead of dialect words).
* ``whole_dialect``: every example of the test dialect.
"""

from __future__ import annotations

import csv
import json
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .assembly import ContextConfig, assemble, order_examples
from .audio import Waveform, load_wav, standardize
from .backend import Backend
from .datastore import (
    Datastore,
    DatastoreFilter,
    Example,
    knn_select,
    load,
    mean_embedding,
    nearest_speaker,
    parse_manifest,
    restrict,
    speaker_profiles,
)
from .errors import ConfigError, DimMismatch, SiclError
from .remote import resolve_backend
from .scoring import UtteranceScore, WERReport, corpus_wer, normalize_hyp, score_utterance

VARIANTS = (
    "same_speaker_same_dialect",
    "nearest_speaker_same_dialect",
    "same_speaker_other_corpus",
    "whole_dialect",
)

CSV_COLUMNS = ("variant", "k", "order", "theta", "lambda", "trial",
               "wer", "S", "D", "I", "N", "dropped")


@dataclass(frozen=True)
class SelectionSpec:
    method: str = "knn"
    trials: int = 1
    seeds: tuple[int, ...] = (0,)

    def __post_init__(self):
        if self.method not in ("knn", "random"):
            raise ConfigError(f"selection method must be knn or random, got {self.method!r}")
        if self.method == "random" and self.trials < 1:
            raise ConfigError("random selection requires trials >= 1")
        if self.method == "random" and len(self.seeds) != self.trials:
            raise ConfigError("random selection needs one seed per trial")


@dataclass(frozen=True)
class ExperimentConfig:
    test_manifest: str
    datastore_dir: str
    output: str
    variant: str = "whole_dialect"
    k_values: tuple[int, ...] = (0, 1, 2, 3, 4)
    order_modes: tuple[str, ...] = ("far_to_near",)
    selection: SelectionSpec = field(default_factory=SelectionSpec)
    theta: str = "mock"
    lambda_: str = "mock"
    context: ContextConfig = field(default_factory=ContextConfig)
    other_datastore_dir: str | None = None
    baseline_no_prompt: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if not self.k_values:
            raise ConfigError("k_values must be non-empty")
        if any(k < 0 for k in self.k_values):
            raise ConfigError("k_values must be non-negative")
        if not self.order_modes:
            raise ConfigError("order_modes must be non-empty")
        if self.variant == "same_speaker_other_corpus" and not self.other_datastore_dir:
            raise ConfigError("same_speaker_other_corpus requires other_datastore_dir")

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        if "lambda" in obj:
            obj["lambda_"] = obj.pop("lambda")
        if "selection" in obj and isinstance(obj["selection"], dict):
            sel = dict(obj["selection"])
            if sel.get("method") == "random" and "seeds" not in sel:
                sel["seeds"] = list(range(sel.get("trials", 1)))
            if "seeds" in sel:
                sel["seeds"] = tuple(sel["seeds"])
            obj["selection"] = SelectionSpec(**sel)
        if "context" in obj and isinstance(obj["context"], dict):
            obj["context"] = ContextConfig(**obj["context"])
        if "k_values" in obj:
            obj["k_values"] = tuple(obj["k_values"])
        if "order_modes" in obj:
            obj["order_modes"] = tuple(obj["order_modes"])
        unknown = set(obj) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class CellKey:
    variant: str
    k: int
    order: str
    theta: str
    lambda_: str
    trial: int


@dataclass
class CellResult:
    key: CellKey
    report: WERReport | None = None
    dropped: int = 0
    error: str | None = None


@dataclass
class ResultTable:
    cells: list[CellResult]
    utterance_logs: list[dict]

    def cell(self, **kwargs) -> CellResult:
        matches = [c for c in self.cells
                   if all(getattr(c.key, k) == v for k, v in kwargs.items())]
        if len(matches) != 1:
            raise KeyError(f"{len(matches)} cells match {kwargs}")
        return matches[0]


@dataclass(frozen=True)
class _TestItem:
    row: dict
    wave: Waveform
    query: np.ndarray


def _mix_seed(seed: int, utt_id: str) -> int:
    return (seed ^ zlib.crc32(utt_id.encode("utf-8"))) & 0x7FFFFFFF


def _parse_order(mode: str) -> tuple[str, int | None]:
    if mode.startswith("random:"):
        return "random", int(mode.split(":", 1)[1])
    return mode, None


def _resolve_pool(item: _TestItem, store: Datastore, other_store: Datastore | None,
                  variant: str) -> tuple[Datastore, DatastoreFilter]:
    row = item.row
    exclude_self = frozenset({str(row["id"])})
    if variant == "same_speaker_same_dialect":
        return store, DatastoreFilter(
            require_dialect=row["dialect"], require_speaker=row["speaker"],
            exclude_ids=exclude_self)
    if variant == "nearest_speaker_same_dialect":
        dialect_store = restrict(store, DatastoreFilter(require_dialect=row["dialect"]))
        profiles = speaker_profiles(dialect_store)
        nearest = nearest_speaker(item.query, profiles, exclude=row["speaker"])
        return store, DatastoreFilter(
            require_dialect=row["dialect"], require_speaker=nearest,
            exclude_labels=frozenset({str(row["label"])}), exclude_ids=exclude_self)
    if variant == "same_speaker_other_corpus":
        return other_store, DatastoreFilter(
            require_speaker=row["speaker"], exclude_ids=exclude_self)
    return store, DatastoreFilter(require_dialect=row["dialect"], exclude_ids=exclude_self)


def _select(item: _TestItem, store: Datastore, filt: DatastoreFilter, k: int,
            selection: SelectionSpec, trial: int) -> list[tuple[Example, float]]:
    if k == 0:
        return []
    if selection.method == "knn":
        return knn_select(item.query, store, k, filt)
    candidates = sorted((e for e in store.examples if filt.admits(e)), key=lambda e: e.id)
    if not candidates:
        return []
    rng = np.random.RandomState(_mix_seed(selection.seeds[trial], str(item.row["id"])))
    picks = rng.choice(len(candidates), size=min(k, len(candidates)), replace=False)
    chosen = [candidates[i] for i in picks]
    pairs = [
        (e, float(np.linalg.norm(e.mean_embedding.astype(np.float64) - item.query)))
        for e in chosen
    ]
    return sorted(pairs, key=lambda p: (p[1], p[0].id))


class ExperimentRunner:
    """Loads manifests, datastores, and backends once; runs cells."""

    def __init__(self, cfg: ExperimentConfig,
                 theta: Backend | None = None, lam: Backend | None = None):
        self.cfg = cfg
        self.theta = theta or resolve_backend(cfg.theta)
        self.lam = lam or resolve_backend(cfg.lambda_)
        self.store = load(cfg.datastore_dir)
        self.other_store = (
            load(cfg.other_datastore_dir) if cfg.other_datastore_dir else None
        )
        self.items = [self._prepare(row) for row in parse_manifest(cfg.test_manifest)]
        if not self.items:
            raise ConfigError(f"{cfg.test_manifest}: no test utterances")
        if len(self.items[0].query) != self.store.dim:
            raise DimMismatch(
                f"retrieval backend dim {len(self.items[0].query)} != "
                f"datastore dim {self.store.dim}"
            )
        self._wave_cache: dict[str, Waveform] = {}

    def _prepare(self, row: dict) -> _TestItem:
        wave = standardize(load_wav(row["audio"]))
        query = mean_embedding(self.theta.encode(wave))
        return _TestItem(row, wave, query)

    def _example_audio(self, path: str) -> Waveform:
        if path not in self._wave_cache:
            self._wave_cache[path] = standardize(load_wav(path))
        return self._wave_cache[path]

    def _cell_context(self, k: int, order: str, order_seed: int | None) -> ContextConfig:
        ctx = replace(self.cfg.context, k=k, order_mode=order)
        if order_seed is not None:
            ctx = replace(ctx, order_seed=order_seed)
        if k == 0 and self.cfg.baseline_no_prompt:
            ctx = replace(ctx, prompt_text=None)
        return ctx

    def run_cell(self, key: CellKey) -> tuple[WERReport, int, list[dict]]:
        """Run every test utterance through one configuration cell.

        Errors from any stage are re-raised tagged with the utterance id.
        """
        order, order_seed = _parse_order(key.order)
        ctx = self._cell_context(key.k, order, order_seed)
        scores: list[UtteranceScore] = []
        logs: list[dict] = []
        dropped_total = 0
        for item in self.items:
            utt_id = str(item.row["id"])
            try:
                pool, filt = _resolve_pool(item, self.store, self.other_store, key.variant)
                selected = _select(item, pool, filt, key.k, self.cfg.selection, key.trial)
                ordered = order_examples(selected, order, ctx.order_seed)
                assembled = assemble(
                    ordered, item.wave, ctx,
                    distances={e.id: d for e, d in selected},
                    audio_provider=self._example_audio,
                )
                transcript = self.lam.transcribe(assembled.audio, assembled.control)
                score = score_utterance(str(item.row["label"]), transcript.text,
                                        utt_id=utt_id)
            except SiclError as exc:
                exc.args = (f"utterance {utt_id}: {exc}",)
                raise
            scores.append(score)
            dropped_total += len(assembled.dropped_examples)
            logs.append({
                "cell": _key_dict(key),
                "utt_id": utt_id,
                "reference": str(item.row["label"]),
                "selected": [{"id": e.id, "distance": d} for e, d in selected],
                "used": list(assembled.used_examples),
                "dropped": list(assembled.dropped_examples),
                "prefix": assembled.prefix_text,
                "hypothesis_raw": transcript.text,
                "hypothesis_normalized": normalize_hyp(transcript.text),
                "counts": {"N": score.ref_len, "S": score.substitutions,
                           "D": score.deletions, "I": score.insertions,
                           "H": score.hits},
            })
        return corpus_wer(scores), dropped_total, logs

    def run(self) -> ResultTable:
        trials = self.cfg.selection.trials if self.cfg.selection.method == "random" else 1
        cells: list[CellResult] = []
        all_logs: list[dict] = []
        for k in self.cfg.k_values:
            for order in self.cfg.order_modes:
                for trial in range(trials):
                    key = CellKey(self.cfg.variant, k, order,
                                  self.cfg.theta, self.cfg.lambda_, trial)
                    try:
                        report, dropped, logs = self.run_cell(key)
                    except SiclError as exc:
                        cells.append(CellResult(key, error=str(exc)))
                    else:
                        cells.append(CellResult(key, report=report, dropped=dropped))
                        all_logs.extend(logs)
        return ResultTable(cells, all_logs)


def run_experiment(cfg: ExperimentConfig,
                   theta: Backend | None = None,
                   lam: Backend | None = None) -> ResultTable:
    """Run the full sweep and write results.csv / results.json /
    utterances.jsonl under cfg.output."""
    table = ExperimentRunner(cfg, theta=theta, lam=lam).run()
    write_results(table, cfg.output)
    return table


def _key_dict(key: CellKey) -> dict:
    return {"variant": key.variant, "k": key.k, "order": key.order,
            "theta": key.theta, "lambda": key.lambda_, "trial": key.trial}


def _sorted_cells(table: ResultTable) -> list[CellResult]:
    return sorted(
        table.cells,
        key=lambda c: (c.key.variant, c.key.k, c.key.order, c.key.trial),
    )


def write_results(table: ResultTable, out_dir: str | Path) -> None:
    """Persist the table deterministically (byte-identical for equal runs):
    fixed CSV columns, sorted keys in JSON, cells in sorted key order."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = _sorted_cells(table)

    with open(out / "results.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for c in cells:
            if c.error is not None:
                writer.writerow([c.key.variant, c.key.k, c.key.order, c.key.theta,
                                 c.key.lambda_, c.key.trial, "", "", "", "", "",
                                 ""])
                continue
            r = c.report
            writer.writerow([
                c.key.variant, c.key.k, c.key.order, c.key.theta, c.key.lambda_,
                c.key.trial, f"{r.wer:.4f}", r.substitutions, r.deletions,
                r.insertions, r.ref_len, c.dropped,
            ])

    payload = {"cells": [], "aggregates": []}
    for c in cells:
        entry = _key_dict(c.key)
        if c.error is not None:
            entry["error"] = c.error
        else:
            entry.update({
                "wer": c.report.wer, "S": c.report.substitutions,
                "D": c.report.deletions, "I": c.report.insertions,
                "N": c.report.ref_len, "H": c.report.hits,
                "utterances": c.report.utterances, "dropped": c.dropped,
            })
        payload["cells"].append(entry)

    groups: dict[tuple, list[float]] = {}
    for c in cells:
        if c.error is None:
            groups.setdefault(
                (c.key.variant, c.key.k, c.key.order), []
            ).append(c.report.wer)
    for (variant, k, order), wers in sorted(groups.items()):
        if len(wers) < 2:
            continue
        payload["aggregates"].append({
            "variant": variant, "k": k, "order": order,
            "trials": len(wers),
            "mean_wer": float(np.mean(wers)),
            "std_wer": float(np.std(wers, ddof=1)),
        })

    with open(out / "results.json", "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, sort_keys=True, indent=2)
        f.write("\n")
    with open(out / "utterances.jsonl", "w", encoding="utf-8") as f:
        for entry in table.utterance_logs:
            f.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")
