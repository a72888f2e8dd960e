"""Example datastore: mean embeddings, filtered exact kNN, speaker profiles.

The datastore holds labelled speech examples keyed by the time-averaged
encoder embedding of their audio. Selection is an exact brute-force
Euclidean scan: pools here are thousands of items, where a full scan is
fast and reproducible, and approximate indexes would change the method.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .audio import load_wav, standardize
from .backend import Backend, EmbeddingSequence
from .errors import (
    CorruptPayload,
    DimMismatch,
    EmptyDatastore,
    FormatVersionMismatch,
    ManifestParseError,
    NoCandidateSpeaker,
)

_MAGIC = b"SICLEMB1"
_MANIFEST_FIELDS = ("id", "audio", "label", "speaker", "dialect")


@dataclass(frozen=True)
class Example:
    """One datastore entry: audio reference, text label, speaker and dialect
    ids, and the precomputed mean embedding used as the retrieval key."""

    id: str
    audio_path: str
    label: str
    speaker_id: str
    dialect_id: str
    mean_embedding: np.ndarray

    def __post_init__(self):
        emb = np.asarray(self.mean_embedding, dtype=np.float32)
        if emb.ndim != 1 or not np.all(np.isfinite(emb)):
            raise ValueError(f"example {self.id}: bad embedding")
        if not self.label:
            raise ValueError(f"example {self.id}: empty label")
        object.__setattr__(self, "mean_embedding", emb)


@dataclass(frozen=True)
class Datastore:
    examples: tuple[Example, ...]
    dim: int
    retrieval_backend_tag: str = ""

    def __post_init__(self):
        ids = [e.id for e in self.examples]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate example ids in datastore")
        for e in self.examples:
            if len(e.mean_embedding) != self.dim:
                raise DimMismatch(
                    f"example {e.id} has dim {len(e.mean_embedding)}, store dim {self.dim}"
                )

    def __len__(self) -> int:
        return len(self.examples)


@dataclass(frozen=True)
class SpeakerProfile:
    speaker_id: str
    avg_embedding: np.ndarray
    example_count: int


@dataclass(frozen=True)
class DatastoreFilter:
    """Conjunctive example filters for selection-time pool restriction."""

    require_dialect: str | None = None
    require_speaker: str | None = None
    exclude_speaker: str | None = None
    exclude_labels: frozenset[str] = field(default_factory=frozenset)
    exclude_ids: frozenset[str] = field(default_factory=frozenset)

    def admits(self, e: Example) -> bool:
        if self.require_dialect is not None and e.dialect_id != self.require_dialect:
            return False
        if self.require_speaker is not None and e.speaker_id != self.require_speaker:
            return False
        if self.exclude_speaker is not None and e.speaker_id == self.exclude_speaker:
            return False
        if e.label in self.exclude_labels or e.id in self.exclude_ids:
            return False
        return True


NO_FILTER = DatastoreFilter()


def mean_embedding(seq: EmbeddingSequence) -> np.ndarray:
    """Time-average of the first ``audio_frames`` frames.

    Padding frames (beyond audio_frames) are excluded so short utterances
    are not diluted by the encoder's fixed-window padding.
    """
    return seq.frames[:seq.audio_frames].astype(np.float64).mean(axis=0).astype(np.float32)


def embed_audio(path: str | Path, backend: Backend) -> np.ndarray:
    """standardize -> encode -> mean_embedding for one audio file."""
    return mean_embedding(backend.encode(standardize(load_wav(path))))


def parse_manifest(path: str | Path) -> list[dict]:
    """Read a JSON-lines manifest with fields id/audio/label/speaker/dialect.

    Relative audio paths are resolved against the manifest's directory.
    """
    base = Path(path).parent
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestParseError(lineno, f"invalid JSON: {exc}") from exc
            missing = [k for k in _MANIFEST_FIELDS if k not in obj]
            if missing:
                raise ManifestParseError(lineno, f"missing fields {missing}")
            obj = dict(obj)
            obj["audio"] = str((base / obj["audio"]))
            obj["_row"] = lineno
            rows.append(obj)
    return rows


def build_datastore(manifest: str | Path, backend: Backend) -> Datastore:
    """Embed every manifest row under the retrieval backend.

    Raises:
        EmptyDatastore: manifest has no rows.
        ManifestParseError: a row is malformed (row number reported).
        DimMismatch: the backend returned inconsistent dimensions.
    """
    rows = parse_manifest(manifest)
    if not rows:
        raise EmptyDatastore(f"{manifest}: no rows")
    examples = []
    dim = None
    for row in rows:
        emb = embed_audio(row["audio"], backend)
        if dim is None:
            dim = len(emb)
        elif len(emb) != dim:
            raise DimMismatch(
                f"row {row['_row']}: embedding dim {len(emb)} != {dim}"
            )
        examples.append(
            Example(
                id=str(row["id"]),
                audio_path=row["audio"],
                label=str(row["label"]),
                speaker_id=str(row["speaker"]),
                dialect_id=str(row["dialect"]),
                mean_embedding=emb,
            )
        )
    return Datastore(tuple(examples), dim, backend.tag)


def knn_select(
    query: np.ndarray,
    store: Datastore,
    k: int,
    filter: DatastoreFilter = NO_FILTER,
) -> list[tuple[Example, float]]:
    """Exact k-nearest-neighbour scan under a filter.

    Returns up to k (example, Euclidean distance) pairs sorted by ascending
    distance, ties broken by ascending example id.
    """
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (store.dim,):
        raise DimMismatch(f"query dim {query.shape} != store dim {store.dim}")
    if k < 1:
        raise ValueError("k must be >= 1")
    candidates = [e for e in store.examples if filter.admits(e)]
    if not candidates:
        return []
    matrix = np.stack([e.mean_embedding.astype(np.float64) for e in candidates])
    dists = np.sqrt(((matrix - query) ** 2).sum(axis=1))
    order = sorted(range(len(candidates)), key=lambda i: (dists[i], candidates[i].id))
    return [(candidates[i], float(dists[i])) for i in order[:k]]


def speaker_profiles(store: Datastore) -> list[SpeakerProfile]:
    """Average each speaker's example embeddings (one profile per speaker)."""
    if not store.examples:
        raise EmptyDatastore("cannot profile an empty datastore")
    groups: dict[str, list[np.ndarray]] = {}
    for e in store.examples:
        groups.setdefault(e.speaker_id, []).append(e.mean_embedding.astype(np.float64))
    return [
        SpeakerProfile(sid, np.mean(vecs, axis=0), len(vecs))
        for sid, vecs in sorted(groups.items())
    ]


def nearest_speaker(
    query: np.ndarray,
    profiles: list[SpeakerProfile],
    exclude: str | None = None,
) -> str:
    """Speaker whose average embedding is Euclidean-closest to the query.

    Ties break by ascending speaker id; the excluded speaker never wins.
    """
    query = np.asarray(query, dtype=np.float64)
    best = None
    for p in profiles:
        if p.speaker_id == exclude:
            continue
        d = float(np.linalg.norm(p.avg_embedding - query))
        if best is None or (d, p.speaker_id) < best[:2]:
            best = (d, p.speaker_id)
    if best is None:
        raise NoCandidateSpeaker("no speaker profile left after exclusion")
    return best[1]


def save(store: Datastore, dirpath: str | Path) -> None:
    """Persist to ``manifest.jsonl`` + ``embeddings.bin`` (+ ``meta.json``).

    embeddings.bin layout: magic "SICLEMB1", u32 count, u32 dim, then
    count*dim little-endian float32, row order matching the manifest.
    """
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "manifest.jsonl", "w", encoding="utf-8") as f:
        for e in store.examples:
            f.write(json.dumps(
                {"id": e.id, "audio": e.audio_path, "label": e.label,
                 "speaker": e.speaker_id, "dialect": e.dialect_id},
                ensure_ascii=False) + "\n")
    with open(d / "embeddings.bin", "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", len(store.examples), store.dim))
        for e in store.examples:
            f.write(e.mean_embedding.astype("<f4").tobytes())
    with open(d / "meta.json", "w", encoding="utf-8") as f:
        json.dump({"retrieval_backend_tag": store.retrieval_backend_tag}, f)


def load(dirpath: str | Path) -> Datastore:
    """Inverse of :func:`save`; embeddings round-trip bit-exactly.

    Raises:
        FormatVersionMismatch: wrong magic in embeddings.bin.
        CorruptPayload: header/payload/manifest sizes disagree.
    """
    d = Path(dirpath)
    blob = (d / "embeddings.bin").read_bytes()
    if blob[:8] != _MAGIC:
        raise FormatVersionMismatch(f"{d}: bad magic {blob[:8]!r}")
    if len(blob) < 16:
        raise CorruptPayload(f"{d}: truncated header")
    count, dim = struct.unpack_from("<II", blob, 8)
    payload = blob[16:]
    if len(payload) != count * dim * 4:
        raise CorruptPayload(
            f"{d}: payload is {len(payload)} bytes, expected {count * dim * 4}"
        )
    embeddings = np.frombuffer(payload, dtype="<f4").reshape(count, dim)

    meta_path = d / "meta.json"
    tag = ""
    if meta_path.exists():
        tag = json.loads(meta_path.read_text(encoding="utf-8")).get(
            "retrieval_backend_tag", "")

    rows = []
    with open(d / "manifest.jsonl", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ManifestParseError(lineno, f"invalid JSON: {exc}") from exc
    if len(rows) != count:
        raise CorruptPayload(f"{d}: {len(rows)} manifest rows vs {count} embeddings")
    examples = tuple(
        Example(
            id=str(r["id"]), audio_path=str(r["audio"]), label=str(r["label"]),
            speaker_id=str(r["speaker"]), dialect_id=str(r["dialect"]),
            mean_embedding=np.array(embeddings[i]),
        )
        for i, r in enumerate(rows)
    )
    return Datastore(examples, int(dim), tag)


def restrict(store: Datastore, filter: DatastoreFilter) -> Datastore:
    """New datastore containing only the examples the filter admits."""
    kept = tuple(e for e in store.examples if filter.admits(e))
    return replace(store, examples=kept)
