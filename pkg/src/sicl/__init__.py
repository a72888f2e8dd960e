"""Speech in-context learning toolkit for encoder-decoder ASR.

Adapts a speech recognizer at test time by concatenating retrieved example
audio ahead of the test utterance and feeding the example labels to the
decoder as a forced prefix. No gradient updates; retrieval is exact kNN
over time-averaged encoder embeddings; evaluation is character-level WER.
"""

from .assembly import AssembledInput, ContextConfig, assemble, build_control, order_examples
from .audio import Waveform, concat_audio, duration_seconds, load_wav, standardize, write_wav
from .backend import (
    ControlSequence,
    EmbeddingSequence,
    MockBackend,
    Transcript,
    make_tone,
    tone_bin,
)
from .datastore import (
    Datastore,
    DatastoreFilter,
    Example,
    SpeakerProfile,
    build_datastore,
    knn_select,
    mean_embedding,
    nearest_speaker,
    speaker_profiles,
)
from .harness import ExperimentConfig, ResultTable, run_experiment
from .remote import HttpBackend, StdioBackend, resolve_backend
from .scoring import (
    UtteranceScore,
    WERReport,
    align,
    corpus_wer,
    normalize_hyp,
    score_utterance,
    tokenize_cjk,
)
from .synth import SynthSpec, make_synthetic_corpus

__version__ = "0.1.0"

__all__ = [
    "AssembledInput",
    "ContextConfig",
    "ControlSequence",
    "Datastore",
    "DatastoreFilter",
    "EmbeddingSequence",
    "Example",
    "ExperimentConfig",
    "HttpBackend",
    "MockBackend",
    "ResultTable",
    "SpeakerProfile",
    "StdioBackend",
    "SynthSpec",
    "Transcript",
    "UtteranceScore",
    "WERReport",
    "Waveform",
    "align",
    "assemble",
    "build_control",
    "build_datastore",
    "concat_audio",
    "corpus_wer",
    "duration_seconds",
    "knn_select",
    "load_wav",
    "make_synthetic_corpus",
    "make_tone",
    "mean_embedding",
    "nearest_speaker",
    "normalize_hyp",
    "order_examples",
    "resolve_backend",
    "run_experiment",
    "score_utterance",
    "speaker_profiles",
    "standardize",
    "tokenize_cjk",
    "tone_bin",
    "write_wav",
]
