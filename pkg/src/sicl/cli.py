"""Command-line front end.

Subcommands: build-datastore, transcribe, evaluate, synth. The backend spec
defaults to the SICL_BACKEND_URL environment variable, falling back to the
in-process mock backend.
"""

from __future__ import annotations

import argparse
import os
import sys

from .assembly import ContextConfig, assemble, order_examples
from .audio import load_wav, standardize
from .datastore import DatastoreFilter, build_datastore, knn_select, mean_embedding
from .datastore import load as load_datastore
from .datastore import save as save_datastore
from .errors import SiclError
from .harness import ExperimentConfig, run_experiment
from .remote import BACKEND_URL_ENV, resolve_backend
from .synth import SynthSpec, make_synthetic_corpus


def _default_backend_spec() -> str:
    return os.environ.get(BACKEND_URL_ENV, "mock")


def _cmd_build_datastore(args) -> int:
    backend = resolve_backend(args.backend)
    store = build_datastore(args.manifest, backend)
    save_datastore(store, args.out)
    print(f"built datastore: {len(store)} examples, dim {store.dim}, "
          f"backend {store.retrieval_backend_tag} -> {args.out}")
    return 0


def _cmd_transcribe(args) -> int:
    backend = resolve_backend(args.backend)
    store = load_datastore(args.datastore)
    wave = standardize(load_wav(args.audio))
    query = mean_embedding(backend.encode(wave))
    selected = knn_select(query, store, args.k, DatastoreFilter()) if args.k else []
    cfg = ContextConfig(
        k=args.k,
        order_mode=args.order,
        language=args.language,
        prompt_text=args.prompt,
        gap_seconds=args.gap_seconds,
    )
    ordered = order_examples(selected, args.order, cfg.order_seed)
    assembled = assemble(ordered, wave, cfg, distances={e.id: d for e, d in selected})
    transcript = backend.transcribe(assembled.audio, assembled.control)
    if args.verbose:
        for e, d in selected:
            marker = "used" if e.id in assembled.used_examples else "dropped"
            print(f"  example {e.id} ({marker}): label {e.label!r} distance {d:.4f}",
                  file=sys.stderr)
        print(f"  prefix: {assembled.prefix_text!r}", file=sys.stderr)
    print(transcript.text)
    return 0


def _cmd_evaluate(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    table = run_experiment(cfg)
    for cell in sorted(table.cells, key=lambda c: (c.key.k, c.key.order, c.key.trial)):
        label = (f"variant={cell.key.variant} k={cell.key.k} order={cell.key.order} "
                 f"trial={cell.key.trial}")
        if cell.error is not None:
            print(f"{label}: ERROR {cell.error}")
        else:
            print(f"{label}: WER {cell.report.wer:.2f} "
                  f"(S={cell.report.substitutions} D={cell.report.deletions} "
                  f"I={cell.report.insertions} N={cell.report.ref_len})")
    print(f"results written to {cfg.output}")
    return 0


def _cmd_synth(args) -> int:
    spec = SynthSpec.from_json(args.spec) if args.spec else SynthSpec()
    corpus = make_synthetic_corpus(spec, args.out)
    print(f"synthetic corpus in {args.out}: {spec.words} test items "
          f"({corpus.variant_test_items} variant), manifests "
          f"{corpus.test_manifest.name} / {corpus.datastore_manifest.name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sicl",
        description="speech in-context learning toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-datastore", help="embed a manifest into a datastore")
    p.add_argument("--manifest", required=True, help="JSON-lines manifest")
    p.add_argument("--backend", default=_default_backend_spec(),
                   help="backend spec: mock, http(s)://..., stdio:CMD")
    p.add_argument("--out", required=True, help="output datastore directory")
    p.set_defaults(func=_cmd_build_datastore)

    p = sub.add_parser("transcribe", help="transcribe one file with retrieved context")
    p.add_argument("--audio", required=True)
    p.add_argument("--datastore", required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--order", default="far_to_near",
                   choices=["far_to_near", "near_to_far", "random"])
    p.add_argument("--language", default=None, help="language id, e.g. zh")
    p.add_argument("--prompt", default=None)
    p.add_argument("--gap-seconds", type=float, default=0.0)
    p.add_argument("--backend", default=_default_backend_spec())
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_transcribe)

    p = sub.add_parser("evaluate", help="run a configured experiment sweep")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("synth", help="generate the synthetic tone-word corpus")
    p.add_argument("--spec", default=None, help="JSON synthesis spec (optional)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SiclError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
