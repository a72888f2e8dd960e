"""Context assembly: presentation order, the label prefix, window overflow.

The assembled input is the whole trick: example audio concatenated ahead of
the test audio for the encoder, example labels joined into a forced prefix
for the decoder.
"""

import numpy as np

from sicl import ContextConfig, Waveform, assemble, duration_seconds, order_examples
from sicl.datastore import Example


def fake_example(eid, label, dur):
    return Example(eid, f"{eid}|{dur}", label, "spk", "dlect",
                   np.zeros(8, dtype=np.float32))


def provider(path):
    eid, dur = path.split("|")
    return Waveform(np.full(round(float(dur) * 16000), 0.2, dtype=np.float32), 16000)


selected = [  # knn output: ascending distance
    (fake_example("near", "甲", 0.6), 0.1),
    (fake_example("mid", "乙", 0.5), 0.4),
    (fake_example("far", "丙", 0.7), 0.9),
]
test = Waveform(np.full(16000, 0.3, dtype=np.float32), 16000)

for mode in ("far_to_near", "near_to_far"):
    ordered = order_examples(selected, mode)
    print(f"{mode}: {[e.id for e in ordered]}")

cfg = ContextConfig(k=3, order_mode="far_to_near", gap_seconds=0.1, language="zh")
out = assemble(order_examples(selected, cfg.order_mode), test, cfg,
               distances={e.id: d for e, d in selected}, audio_provider=provider)
print(f"prefix: {out.prefix_text!r}")
print(f"control: language={out.control.language} prompt={out.control.prompt_text!r} "
      f"no_timestamps={out.control.no_timestamps}")
print(f"assembled duration: {duration_seconds(out.audio):.2f} s "
      f"(used {list(out.used_examples)})")

# Shrink the window budget until examples start falling off the far end.
tight = ContextConfig(k=3, order_mode="far_to_near", gap_seconds=0.1,
                      max_window_seconds=2.0)
out = assemble(order_examples(selected, tight.order_mode), test, tight,
               distances={e.id: d for e, d in selected}, audio_provider=provider)
print(f"with a 2 s budget: used {list(out.used_examples)}, "
      f"dropped {list(out.dropped_examples)} (farthest first)")
