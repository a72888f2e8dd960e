"""The deterministic mock backend and the context-biasing phenomenon.

The mock models the one behavior that matters for in-context adaptation:
a word with two surface forms comes back in its dialect form exactly when
that form already appears in the decoder prefix.
"""

import numpy as np

from sicl import ControlSequence, MockBackend, concat_audio, make_tone, tone_bin
from sicl.backend import DEFAULT_LABEL_TABLE, TONE_FREQUENCIES

mock = MockBackend()

print("tone vocabulary (frequency -> embedding bin -> default/variant):")
for f in TONE_FREQUENCIES:
    b = tone_bin(f)
    default, variant = DEFAULT_LABEL_TABLE[b]
    print(f"  {f:>5} Hz -> bin {b} -> {default} / {variant}")

# Encoding a tone gives one-hot frames at its bin.
word = make_tone(700)
seq = mock.encode(word)
print(f"\nencoded 700 Hz word: {seq.frames.shape[0]} frames x {seq.dim} dims, "
      f"hot bin {int(np.argmax(seq.frames[0]))}")

# Without context the mock always answers with the standard form.
bare = mock.transcribe(word, ControlSequence())
print(f"no context: {bare.text!r}")

# Put the variant form in the prefix (as in-context example labels would)
# and the same audio now comes back in the dialect form.
default, variant = DEFAULT_LABEL_TABLE[tone_bin(700)]
context_audio = concat_audio([make_tone(700), word], gap_seconds=0.1)
biased = mock.transcribe(context_audio, ControlSequence(prefix_text=f"{variant}。"))
print(f"with {variant!r} in the prefix: {biased.text!r}")

# Variants of unrelated words do not help: the rule keys on the test word.
noise_prefix = "".join(DEFAULT_LABEL_TABLE[b][1] for b in (0, 2, 4))
unbiased = mock.transcribe(context_audio, ControlSequence(prefix_text=noise_prefix))
print(f"with unrelated variants in the prefix: {unbiased.text!r}")
