"""Character-level WER: normalization rules, alignment, corpus aggregation."""

from sicl import align, corpus_wer, normalize_hyp, score_utterance, tokenize_cjk

# Normalization strips punctuation, fixes whitespace, and collapses the
# looping artifacts decoders sometimes produce; honest reduplication stays.
for raw in ("你好。", "识别 方言!", "的的的的的", "哈哈", "ok 了 ok"):
    print(f"{raw!r:<16} -> {normalize_hyp(raw)!r}")

# Chinese scores at the character level; Latin runs stay whole.
print(f"\ntokens: {tokenize_cjk('重庆话ok了')}")

# Alignment prefers substitutions over insert+delete pairs, and the rate
# can exceed 100% when the hypothesis is longer than the reference.
s = align(["甲"], ["乙", "丙"])
print(f"1 ref token vs 2 wrong tokens: S={s.substitutions} I={s.insertions} "
      f"WER {s.wer:.1f}%")

# The corpus metric micro-averages: sum counts, then divide.
scores = [
    score_utterance("重庆话", "重庆话", utt_id="u1"),
    score_utterance("识别方言", "识别防眼", utt_id="u2"),
    score_utterance("你好", "你好。你好", utt_id="u3"),
]
report = corpus_wer(scores)
for u in scores:
    print(f"  {u.utt_id}: N={u.ref_len} errors={u.errors} ({u.wer:.1f}%)")
print(f"corpus: {report.wer:.2f}% over {report.ref_len} reference characters")
