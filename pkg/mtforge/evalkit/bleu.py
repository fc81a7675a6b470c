# mtforge/evalkit/bleu.py
"""
Corpus-level BLEU over token sequences, and spBLEU (BLEU over vocab-tokenized
text).

Counts are clipped per segment against its single reference and summed over
the corpus before precisions are formed. With exp smoothing, every order with
zero matches doubles a divisor s and gets precision 1 / (s * total). Orders
for which the hypotheses hold no n-grams at all are left out of the geometric
mean, so a corpus scored against itself is always 100.
"""

import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Hashable, List, Optional, Sequence, Tuple

from mtforge.errors import BleuError
from mtforge.tokenization import VocabTokenizer, tokenize

MAX_ORDER = 4
SMOOTHING = ("exp", "none")


@dataclass
class NgramCounts:
    correct: List[int]
    total: List[int]
    sys_len: int = 0
    ref_len: int = 0

    @classmethod
    def zeros(cls, max_order: int = MAX_ORDER) -> "NgramCounts":
        return cls([0] * max_order, [0] * max_order)

    def __add__(self, other: "NgramCounts") -> "NgramCounts":
        if len(self.correct) != len(other.correct):
            raise BleuError("cannot add counts of different max orders")
        return NgramCounts(
            [a + b for a, b in zip(self.correct, other.correct)],
            [a + b for a, b in zip(self.total, other.total)],
            self.sys_len + other.sys_len,
            self.ref_len + other.ref_len,
        )


def _ngrams(tokens: Sequence[Hashable], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def extract_counts(hyp: Sequence[Hashable], ref: Sequence[Hashable], max_order: int = MAX_ORDER) -> NgramCounts:
    counts = NgramCounts.zeros(max_order)
    counts.sys_len, counts.ref_len = len(hyp), len(ref)
    for n in range(1, max_order + 1):
        hyp_ngrams = _ngrams(hyp, n)
        ref_ngrams = _ngrams(ref, n)
        counts.total[n - 1] = sum(hyp_ngrams.values())
        counts.correct[n - 1] = sum(min(c, ref_ngrams[g]) for g, c in hyp_ngrams.items())
    return counts


@dataclass(frozen=True)
class BleuScore:
    score: float
    # None for orders with no n-grams in the corpus; those sit outside effective_order
    precisions: Tuple[Optional[float], ...]
    bp: float
    sys_len: int
    ref_len: int
    correct: Tuple[int, ...]
    total: Tuple[int, ...]
    smoothing: str = "exp"
    effective_order: int = MAX_ORDER
    tokenizer: Optional[str] = None

    def to_json(self) -> dict:
        obj = {
            "score": self.score,
            "precisions": list(self.precisions),
            "bp": self.bp,
            "sys_len": self.sys_len,
            "ref_len": self.ref_len,
            "correct": list(self.correct),
            "total": list(self.total),
            "smoothing": self.smoothing,
            "effective_order": self.effective_order,
        }
        if self.tokenizer is not None:
            obj["tokenizer"] = self.tokenizer
        return obj

    def __str__(self) -> str:
        precs = "/".join("-" if p is None else f"{100 * p:.1f}" for p in self.precisions)
        return (
            f"BLEU = {self.score:.2f} {precs} (BP = {self.bp:.3f} "
            f"hyp_len = {self.sys_len} ref_len = {self.ref_len})"
        )


def score_from_counts(counts: NgramCounts, smoothing: str = "exp", tokenizer: Optional[str] = None) -> BleuScore:
    if smoothing not in SMOOTHING:
        raise BleuError(f"unknown smoothing {smoothing!r}; expected one of {', '.join(SMOOTHING)}")
    max_order = len(counts.total)
    precisions: List[Optional[float]] = [None] * max_order
    s = 1.0
    effective = 0
    for n in range(max_order):
        if counts.total[n] == 0:
            continue
        effective += 1
        precisions[n] = 0.0
        if counts.correct[n] > 0:
            precisions[n] = counts.correct[n] / counts.total[n]
        elif smoothing == "exp":
            s *= 2
            precisions[n] = 1.0 / (s * counts.total[n])

    if counts.sys_len == 0:
        bp = 0.0
    elif counts.sys_len >= counts.ref_len:
        bp = 1.0
    else:
        bp = math.exp(1 - counts.ref_len / counts.sys_len)

    used = [p for p in precisions if p is not None]
    if bp == 0.0 or not used or any(p == 0.0 for p in used):
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in used) / len(used))

    return BleuScore(
        score=score,
        precisions=tuple(precisions),
        bp=bp,
        sys_len=counts.sys_len,
        ref_len=counts.ref_len,
        correct=tuple(counts.correct),
        total=tuple(counts.total),
        smoothing=smoothing,
        effective_order=effective,
        tokenizer=tokenizer,
    )


def corpus_bleu(
    hyps: Sequence[Sequence[Hashable]],
    refs: Sequence[Sequence[Hashable]],
    max_order: int = MAX_ORDER,
    smoothing: str = "exp",
) -> BleuScore:
    """Corpus BLEU with one reference per hypothesis."""
    if not hyps:
        raise BleuError("no hypotheses to score")
    if len(hyps) != len(refs):
        raise BleuError(f"{len(hyps)} hypotheses but {len(refs)} references")
    counts = NgramCounts.zeros(max_order)
    for hyp, ref in zip(hyps, refs):
        counts = counts + extract_counts(hyp, ref, max_order)
    return score_from_counts(counts, smoothing)


def spbleu(
    hyp_texts: Sequence[str],
    ref_texts: Sequence[str],
    tok: VocabTokenizer,
    smoothing: str = "exp",
) -> BleuScore:
    """corpus_bleu over tokenize(tok, .) of both sides; records the tokenizer name."""
    if not hyp_texts:
        raise BleuError("no hypotheses to score")
    if len(hyp_texts) != len(ref_texts):
        raise BleuError(f"{len(hyp_texts)} hypotheses but {len(ref_texts)} references")
    hyps = [tokenize(tok, t) for t in hyp_texts]
    refs = [tokenize(tok, t) for t in ref_texts]
    result = corpus_bleu(hyps, refs, smoothing=smoothing)
    return replace(result, tokenizer=tok.name)
