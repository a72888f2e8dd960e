"""Exception types shared across the toolkit."""


class SiclError(Exception):
    """Base class for all toolkit errors."""


class MalformedWav(SiclError):
    """WAV file has a bad header, truncated payload, or invalid samples."""


class UnsupportedEncoding(SiclError):
    """WAV file uses an encoding outside PCM16/24/32 and 32-bit float."""


class RateMismatch(SiclError):
    """Waveforms with different sample rates were combined."""


class BackendUnavailable(SiclError):
    """The ASR backend could not be reached or failed internally."""


class AudioTooLong(SiclError):
    """Audio exceeds the backend's input window."""


class ControlRejected(SiclError):
    """The backend cannot honor a requested control field."""


class ManifestParseError(SiclError):
    """A manifest row could not be parsed."""

    def __init__(self, row: int, message: str):
        super().__init__(f"manifest row {row}: {message}")
        self.row = row


class EmptyDatastore(SiclError):
    """A datastore was built from, or queried over, zero examples."""


class DimMismatch(SiclError):
    """Embedding dimensionality disagrees with the datastore."""


class FormatVersionMismatch(SiclError):
    """Persisted datastore has an unknown magic/version."""


class CorruptPayload(SiclError):
    """Persisted datastore payload length disagrees with its header."""


class NoCandidateSpeaker(SiclError):
    """No speaker profile remains after exclusions."""


class EmptyCorpus(SiclError):
    """A corpus metric was requested over zero utterances."""


class TestTooLong(SiclError):
    """The test utterance alone exceeds the context window budget."""

    __test__ = False  # keep pytest from collecting this as a test class


class MissingAudio(SiclError):
    """An example's audio file could not be read."""


class ConfigError(SiclError):
    """An experiment configuration is invalid."""
