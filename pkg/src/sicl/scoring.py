"""Hypothesis normalization, character tokenization, and WER.

Chinese text is scored at the character level: each CJK codepoint is one
token, contiguous Latin/digit runs are one token. Alignment is unit-cost
Levenshtein with an SCTK-compatible backtrace preference
(match > substitution > deletion > insertion). The corpus metric is a
micro-average, 100 * (S + D + I) / sum(N), and can exceed 100.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import EmptyCorpus

_PUNCT_RANGES = (
    (0x3000, 0x303F),  # CJK symbols and punctuation
    (0xFF01, 0xFF0F),  # fullwidth forms
    (0xFF1A, 0xFF20),
    (0xFF3B, 0xFF40),
    (0xFF5B, 0xFF65),
)
_ASCII_PUNCT = set(r"""!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~""")

_CJK_RANGES = (
    (0x3400, 0x4DBF),   # CJK extension A
    (0x4E00, 0x9FFF),   # CJK unified ideographs
    (0xF900, 0xFAFF),   # CJK compatibility ideographs
)


def _is_punct(ch: str) -> bool:
    if ch in _ASCII_PUNCT:
        return True
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _PUNCT_RANGES)


def is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


_CJK_CLASS = "".join(f"{chr(lo)}-{chr(hi)}" for lo, hi in _CJK_RANGES)
_WS_BEFORE_CJK = re.compile(rf"\s+(?=[{_CJK_CLASS}])")
_WS_AFTER_CJK = re.compile(rf"(?<=[{_CJK_CLASS}])\s+")


def collapse_repeats(text: str, max_ngram: int = 4, min_repeats: int = 3) -> str:
    """Collapse character n-grams repeated >= min_repeats times in a row.

    Applied for n = max_ngram down to 1 and iterated to a fixed point, so
    looping artifacts like "的的的的的" reduce to "的" while legitimate
    reduplication ("哈哈") survives.
    """
    while True:
        before = text
        for n in range(max_ngram, 0, -1):
            text = re.sub(
                rf"(.{{{n}}})\1{{{min_repeats - 1},}}", r"\1", text, flags=re.DOTALL
            )
        if text == before:
            return text


def normalize_hyp(text: str, max_ngram: int = 4, min_repeats: int = 3) -> str:
    """Strip punctuation, normalize whitespace, collapse duplicate runs.

    Whitespace vanishes between CJK characters and collapses to a single
    space between Latin tokens. Whitespace is normalized before duplicate
    collapsing so the whole function is idempotent.
    """
    text = "".join(ch for ch in text if not _is_punct(ch))
    text = _WS_BEFORE_CJK.sub("", text)
    text = _WS_AFTER_CJK.sub("", text)
    text = " ".join(text.split())
    return collapse_repeats(text, max_ngram=max_ngram, min_repeats=min_repeats)


_TOKEN_RE = re.compile(rf"[{_CJK_CLASS}]|[A-Za-z0-9]+|\S")


def tokenize_cjk(text: str) -> list[str]:
    """One token per CJK codepoint; Latin/digit runs are single tokens."""
    return _TOKEN_RE.findall(text)


@dataclass(frozen=True)
class UtteranceScore:
    """Alignment counts for one utterance against its reference."""

    ref_len: int
    substitutions: int
    deletions: int
    insertions: int
    hits: int
    utt_id: str = ""

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        if self.ref_len == 0:
            return 0.0 if self.errors == 0 else float("inf")
        return 100.0 * self.errors / self.ref_len


@dataclass(frozen=True)
class WERReport:
    """Corpus-level micro-average over utterance scores."""

    utterances: int
    ref_len: int
    substitutions: int
    deletions: int
    insertions: int
    hits: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        if self.ref_len == 0:
            return 0.0 if self.errors == 0 else float("inf")
        return 100.0 * self.errors / self.ref_len


def align(ref: list[str], hyp: list[str], utt_id: str = "") -> UtteranceScore:
    """Unit-cost Levenshtein alignment counts.

    Backtrace preference among equal-cost paths: match, then substitution,
    then deletion, then insertion; so a mismatch pairs as one substitution
    rather than a deletion plus insertion.
    """
    n, m = len(ref), len(hyp)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dp[i][0] = i
    for j in range(1, m + 1):
        dp[0][j] = j
    for i in range(1, n + 1):
        row, prev = dp[i], dp[i - 1]
        ri = ref[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (ri != hyp[j - 1])
            row[j] = min(diag, prev[j] + 1, row[j - 1] + 1)

    subs = dels = ins = hits = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            if ref[i - 1] == hyp[j - 1]:
                hits += 1
            else:
                subs += 1
            i, j = i - 1, j - 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return UtteranceScore(n, subs, dels, ins, hits, utt_id=utt_id)


def score_utterance(ref_text: str, hyp_text: str, utt_id: str = "",
                    normalize: bool = True) -> UtteranceScore:
    """Normalize both sides, tokenize, align.

    References are passed through the same normalization as hypotheses so a
    stray delimiter in a label cannot surface as a spurious deletion.
    """
    if normalize:
        ref_text = normalize_hyp(ref_text)
        hyp_text = normalize_hyp(hyp_text)
    return align(tokenize_cjk(ref_text), tokenize_cjk(hyp_text), utt_id=utt_id)


def corpus_wer(reports: list[UtteranceScore]) -> WERReport:
    """Micro-average: sum the counts, then divide (never a mean of WERs)."""
    if not reports:
        raise EmptyCorpus("corpus_wer requires at least one utterance")
    return WERReport(
        utterances=len(reports),
        ref_len=sum(r.ref_len for r in reports),
        substitutions=sum(r.substitutions for r in reports),
        deletions=sum(r.deletions for r in reports),
        insertions=sum(r.insertions for r in reports),
        hits=sum(r.hits for r in reports),
    )


def write_trn(path, utterances: list[tuple[str, str]]) -> None:
    """trn-style export for external scorers: "tokens (utt-id)" per line."""
    with open(path, "w", encoding="utf-8") as f:
        for utt_id, text in utterances:
            f.write(" ".join(tokenize_cjk(text)) + f" ({utt_id})\n")
