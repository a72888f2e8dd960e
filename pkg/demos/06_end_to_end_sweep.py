"""The full story: synthesize a corpus, build a datastore, sweep k.

Half of the test words carry a dialect form the bare model never produces,
so the no-context error rate is 50%. Retrieved in-context examples put the
dialect forms into the prefix and the error rate falls as k grows.
"""

import tempfile
from pathlib import Path

from sicl import ContextConfig, ExperimentConfig, MockBackend, run_experiment
from sicl.datastore import build_datastore, save
from sicl.synth import SynthSpec, make_synthetic_corpus

workdir = Path(tempfile.mkdtemp(prefix="sicl_demo_"))

corpus = make_synthetic_corpus(
    SynthSpec(words=200, bins=8, variant_fraction=0.5, speakers=4,
              seed=42, examples_per_word=2),
    workdir / "corpus",
)
print(f"corpus: 200 test items, {corpus.variant_test_items} in dialect form")

store = build_datastore(corpus.datastore_manifest, MockBackend())
save(store, workdir / "store")

cfg = ExperimentConfig(
    test_manifest=str(corpus.test_manifest),
    datastore_dir=str(workdir / "store"),
    output=str(workdir / "results"),
    variant="whole_dialect",
    k_values=(0, 1, 2, 3, 4),
    order_modes=("far_to_near",),
    theta="mock",
    lambda_="mock",
    context=ContextConfig(gap_seconds=0.1),
)
table = run_experiment(cfg)

print("\n  k   WER")
for cell in sorted(table.cells, key=lambda c: c.key.k):
    print(f"  {cell.key.k}   {cell.report.wer:5.1f}")
print(f"\nfull table and per-utterance logs in {cfg.output}")
