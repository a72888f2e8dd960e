import math

import numpy as np
import pytest

from sicl.backend import EmbeddingSequence
from sicl.datastore import (
    Datastore,
    DatastoreFilter,
    Example,
    build_datastore,
    knn_select,
    load,
    mean_embedding,
    nearest_speaker,
    save,
    speaker_profiles,
)
from sicl.errors import (
    CorruptPayload,
    DimMismatch,
    EmptyDatastore,
    FormatVersionMismatch,
    ManifestParseError,
)
from sicl.synth import SynthSpec, make_synthetic_corpus


def example(eid, emb, label="词", speaker="s0", dialect="d0"):
    return Example(eid, f"{eid}.wav", label, speaker, dialect, np.asarray(emb, dtype=np.float32))


def store_of(*examples):
    return Datastore(tuple(examples), dim=len(examples[0].mean_embedding))


def knn_oracle(query, examples, k):
    """Plain-Python exhaustive sort: the independent reference for knn_select."""
    scored = []
    for e in examples:
        d = math.sqrt(sum((float(a) - float(b)) ** 2
                          for a, b in zip(e.mean_embedding, query)))
        scored.append((d, e.id, e))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [(e, d) for d, _, e in scored[:k]]


class TestMeanEmbedding:
    def test_single_frame_identity(self):
        seq = EmbeddingSequence(np.array([[1.0, 2.0, 3.0]]), 0.02, 1)
        np.testing.assert_array_equal(mean_embedding(seq), [1.0, 2.0, 3.0])

    def test_two_frames(self):
        seq = EmbeddingSequence(np.array([[1.0, 0.0], [0.0, 1.0]]), 0.02, 2)
        np.testing.assert_array_equal(mean_embedding(seq), [0.5, 0.5])

    def test_padding_frames_excluded(self):
        frames = np.array([[1.0, 0.0], [1.0, 0.0], [9.0, 9.0]])
        seq = EmbeddingSequence(frames, 0.02, 2)
        np.testing.assert_array_equal(mean_embedding(seq), [1.0, 0.0])

    def test_mock_700hz_tone_is_one_hot(self, mock_backend):
        from sicl.backend import make_tone

        emb = mean_embedding(mock_backend.encode(make_tone(700, duration=1.0)))
        expected = np.zeros(8, dtype=np.float32)
        expected[1] = 1.0  # 700 * 8 / 4000 = 1.4 -> bin 1
        np.testing.assert_array_equal(emb, expected)

    def test_constant_frames_mean_is_that_frame(self):
        v = np.array([0.3, -0.7, 2.0])
        for audio_frames in (1, 3, 5):
            seq = EmbeddingSequence(np.tile(v, (5, 1)), 0.02, audio_frames)
            np.testing.assert_allclose(mean_embedding(seq), v, rtol=1e-6)


class TestBuildDatastore:
    def test_empty_manifest_rejected(self, tmp_path, mock_backend):
        manifest = tmp_path / "empty.jsonl"
        manifest.write_text("")
        with pytest.raises(EmptyDatastore):
            build_datastore(manifest, mock_backend)

    def test_three_tones_give_one_hot_bins(self, tmp_path, mock_backend):
        corpus = make_synthetic_corpus(SynthSpec(words=3, bins=3, seed=1), tmp_path)
        store = build_datastore(corpus.test_manifest, mock_backend)
        assert store.dim == 8
        hot_bins = [int(np.argmax(e.mean_embedding)) for e in store.examples]
        assert hot_bins == [0, 1, 2]

    def test_rebuild_is_deterministic(self, tmp_path, mock_backend):
        corpus = make_synthetic_corpus(SynthSpec(words=4, bins=4, seed=2), tmp_path)
        a = build_datastore(corpus.test_manifest, mock_backend)
        b = build_datastore(corpus.test_manifest, mock_backend)
        assert [e.id for e in a.examples] == [e.id for e in b.examples]
        for ea, eb in zip(a.examples, b.examples):
            np.testing.assert_array_equal(ea.mean_embedding, eb.mean_embedding)

    def test_bad_row_reports_line_number(self, tmp_path, mock_backend):
        manifest = tmp_path / "bad.jsonl"
        manifest.write_text(
            '{"id": "a", "audio": "x.wav", "label": "y", "speaker": "s", "dialect": "d"}\n'
            "{nonsense}\n"
        )
        with pytest.raises(ManifestParseError) as err:
            build_datastore(manifest, mock_backend)
        assert err.value.row == 2


class TestKnnSelect:
    def test_exact_match_distance_zero(self):
        a = example("a", [1.0, 0.0])
        b = example("b", [0.0, 1.0])
        out = knn_select(np.array([1.0, 0.0]), store_of(a, b), k=1)
        assert [(e.id, d) for e, d in out] == [("a", 0.0)]

    def test_matches_oracle_on_random_stores(self):
        rng = np.random.RandomState(1234)
        for _ in range(100):
            n = rng.randint(1, 65)
            examples = [example(f"e{i:03d}", rng.randn(8)) for i in range(n)]
            store = store_of(*examples)
            query = rng.randn(8)
            k = rng.randint(1, 9)
            got = knn_select(query, store, k)
            want = knn_oracle(query, examples, k)
            assert [e.id for e, _ in got] == [e.id for e, _ in want]
            for (_, dg), (_, dw) in zip(got, want):
                assert abs(dg - dw) < 1e-9

    def test_label_exclusion_filters_same_word(self):
        a = example("a", [0.0, 0.0], label="同")
        b = example("b", [1.0, 0.0], label="异")
        filt = DatastoreFilter(exclude_labels=frozenset({"同"}))
        out = knn_select(np.array([0.0, 0.0]), store_of(a, b), k=2, filter=filt)
        assert [e.id for e, _ in out] == ["b"]

    def test_ties_break_by_id(self):
        a = example("b-second", [1.0, 0.0])
        b = example("a-first", [0.0, 1.0])
        out = knn_select(np.array([0.0, 0.0]), store_of(a, b), k=2)
        assert [e.id for e, _ in out] == ["a-first", "b-second"]

    def test_k_larger_than_store_returns_all_sorted(self):
        examples = [example(f"e{i}", [float(i), 0.0]) for i in range(5)]
        out = knn_select(np.array([0.0, 0.0]), store_of(*examples), k=50)
        assert len(out) == 5
        dists = [d for _, d in out]
        assert dists == sorted(dists)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            knn_select(np.zeros(3), store_of(example("a", [0.0, 0.0])), k=1)

    def test_scale_invariance_of_ranking(self):
        rng = np.random.RandomState(99)
        examples = [example(f"e{i}", rng.randn(4)) for i in range(20)]
        query = rng.randn(4)
        base = knn_select(query, store_of(*examples), k=5)
        scaled_examples = [
            example(e.id, e.mean_embedding * 7.5) for e in examples
        ]
        scaled = knn_select(query * 7.5, store_of(*scaled_examples), k=5)
        assert [e.id for e, _ in base] == [e.id for e, _ in scaled]

    def test_speaker_and_dialect_filters_compose(self):
        a = example("a", [0.0, 0.0], speaker="s1", dialect="d1")
        b = example("b", [0.0, 0.0], speaker="s1", dialect="d2")
        c = example("c", [0.0, 0.0], speaker="s2", dialect="d1")
        filt = DatastoreFilter(require_dialect="d1", require_speaker="s1")
        out = knn_select(np.zeros(2), store_of(a, b, c), k=3, filter=filt)
        assert [e.id for e, _ in out] == ["a"]


class TestSpeakerProfiles:
    def test_single_example_profile(self):
        st = store_of(example("a", [3.0, 4.0], speaker="solo"))
        (profile,) = speaker_profiles(st)
        assert profile.speaker_id == "solo"
        np.testing.assert_array_equal(profile.avg_embedding, [3.0, 4.0])
        assert profile.example_count == 1

    def test_average_of_two(self):
        st = store_of(
            example("a", [0.0, 2.0], speaker="s"),
            example("b", [2.0, 0.0], speaker="s"),
        )
        (profile,) = speaker_profiles(st)
        np.testing.assert_allclose(profile.avg_embedding, [1.0, 1.0], atol=1e-6)

    def test_profile_count_matches_distinct_speakers(self):
        rng = np.random.RandomState(5)
        examples = [
            example(f"e{i}", rng.randn(3), speaker=f"s{i % 7}") for i in range(30)
        ]
        profiles = speaker_profiles(store_of(*examples))
        assert len(profiles) == len({e.speaker_id for e in examples})


class TestNearestSpeaker:
    def test_single_profile(self):
        profiles = speaker_profiles(store_of(example("a", [1.0], speaker="only")))
        assert nearest_speaker(np.array([5.0]), profiles) == "only"

    def test_closest_wins(self):
        st = store_of(
            example("a", [1.0, 0.0], speaker="A"),
            example("b", [0.0, 2.0], speaker="B"),
        )
        assert nearest_speaker(np.zeros(2), speaker_profiles(st)) == "A"

    def test_equidistant_breaks_lexicographically(self):
        st = store_of(
            example("a", [1.0, 0.0], speaker="B"),
            example("b", [0.0, 1.0], speaker="A"),
        )
        assert nearest_speaker(np.zeros(2), speaker_profiles(st)) == "A"

    def test_exclusion(self):
        from sicl.errors import NoCandidateSpeaker

        st = store_of(example("a", [0.0], speaker="only"))
        profiles = speaker_profiles(st)
        with pytest.raises(NoCandidateSpeaker):
            nearest_speaker(np.array([0.0]), profiles, exclude="only")


class TestPersistence:
    def _random_store(self, n=50, dim=8, seed=0, tag="mock"):
        rng = np.random.RandomState(seed)
        examples = tuple(
            example(f"e{i:04d}", rng.randn(dim).astype(np.float32),
                    label=f"w{i}", speaker=f"s{i % 5}", dialect=f"d{i % 2}")
            for i in range(n)
        )
        return Datastore(examples, dim, tag)

    def test_roundtrip_bit_exact(self, tmp_path):
        store = self._random_store()
        save(store, tmp_path / "ds")
        again = load(tmp_path / "ds")
        assert again.dim == store.dim
        assert again.retrieval_backend_tag == store.retrieval_backend_tag
        assert len(again) == len(store)
        for a, b in zip(store.examples, again.examples):
            assert (a.id, a.audio_path, a.label, a.speaker_id, a.dialect_id) == (
                b.id, b.audio_path, b.label, b.speaker_id, b.dialect_id)
            assert a.mean_embedding.tobytes() == b.mean_embedding.tobytes()

    def test_wrong_magic(self, tmp_path):
        store = self._random_store(n=3)
        save(store, tmp_path / "ds")
        blob = (tmp_path / "ds" / "embeddings.bin").read_bytes()
        (tmp_path / "ds" / "embeddings.bin").write_bytes(b"WRONGMAG" + blob[8:])
        with pytest.raises(FormatVersionMismatch):
            load(tmp_path / "ds")

    def test_truncated_payload(self, tmp_path):
        store = self._random_store(n=4, dim=8)
        save(store, tmp_path / "ds")
        path = tmp_path / "ds" / "embeddings.bin"
        blob = path.read_bytes()
        path.write_bytes(blob[:-7])  # no longer divisible by 8 * 4
        with pytest.raises(CorruptPayload):
            load(tmp_path / "ds")

    def test_manifest_count_mismatch(self, tmp_path):
        store = self._random_store(n=4)
        save(store, tmp_path / "ds")
        manifest = tmp_path / "ds" / "manifest.jsonl"
        lines = manifest.read_text(encoding="utf-8").splitlines()
        manifest.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")
        with pytest.raises(CorruptPayload):
            load(tmp_path / "ds")
