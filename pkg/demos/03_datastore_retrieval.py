"""Datastore lifecycle: build from a manifest, query, persist, reload.

Retrieval keys are time-averaged encoder embeddings; selection is an exact
Euclidean scan with deterministic tie-breaks.
"""

import tempfile
from pathlib import Path

from sicl import MockBackend, knn_select, load_wav, mean_embedding, standardize
from sicl.datastore import DatastoreFilter, build_datastore, load, save, speaker_profiles
from sicl.synth import SynthSpec, make_synthetic_corpus

workdir = Path(tempfile.mkdtemp(prefix="sicl_demo_"))
mock = MockBackend()

# The synthetic corpus gives us a manifest of labelled tone-word audio.
corpus = make_synthetic_corpus(
    SynthSpec(words=24, bins=6, variant_fraction=0.5, speakers=3, seed=11),
    workdir / "corpus",
)
store = build_datastore(corpus.datastore_manifest, mock)
print(f"built datastore: {len(store)} examples, dim {store.dim}")

# Embed one test utterance the same way and ask for its nearest examples.
first_wav = next((workdir / "corpus" / "wavs").glob("*.wav"))
query = mean_embedding(mock.encode(standardize(load_wav(first_wav))))
for example, distance in knn_select(query, store, k=4):
    print(f"  {example.id}: label {example.label!r} speaker {example.speaker_id} "
          f"distance {distance:.3f}")

# Filters compose conjunctively; exclude-label implements the
# same-word-avoided ablation.
filtered = knn_select(query, store, k=4,
                      filter=DatastoreFilter(exclude_labels=frozenset(
                          e.label for e, d in knn_select(query, store, k=1))))
print(f"after excluding the nearest label: {[e.id for e, _ in filtered]}")

# Speaker profiles average each speaker's example embeddings.
for profile in speaker_profiles(store):
    print(f"  speaker {profile.speaker_id}: {profile.example_count} examples")

# Persistence round-trips embeddings bit-exactly.
save(store, workdir / "saved")
again = load(workdir / "saved")
match = all(
    a.mean_embedding.tobytes() == b.mean_embedding.tobytes()
    for a, b in zip(store.examples, again.examples)
)
print(f"save/load bit-exact: {match}")
