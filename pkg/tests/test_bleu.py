import math
import random

import pytest

from mtforge.errors import BleuError
from mtforge.evalkit import NgramCounts, corpus_bleu, extract_counts, spbleu
from mtforge.evalkit.bleu import score_from_counts
from mtforge.tokenization import tokenize


def reference_bleu(hyps, refs, smoothing="exp", max_order=4):
    """Straight from the definition: greedy n-gram matching, product of precisions."""
    correct, total = [0] * max_order, [0] * max_order
    sys_len = ref_len = 0
    for hyp, ref in zip(hyps, refs):
        sys_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_order + 1):
            available = [tuple(ref[i:i + n]) for i in range(len(ref) - n + 1)]
            for i in range(len(hyp) - n + 1):
                total[n - 1] += 1
                gram = tuple(hyp[i:i + n])
                if gram in available:
                    available.remove(gram)
                    correct[n - 1] += 1
    if sys_len == 0:
        return 0.0
    s, product, orders = 1, 1.0, 0
    for c, t in zip(correct, total):
        if t == 0:
            continue
        orders += 1
        if c:
            product *= c / t
        elif smoothing == "exp":
            s *= 2
            product *= 1 / (s * t)
        else:
            return 0.0
    if orders == 0:
        return 0.0
    bp = 1.0 if sys_len >= ref_len else math.exp(1 - ref_len / sys_len)
    return 100 * bp * product ** (1 / orders)


def random_segments(rng):
    return [[rng.choice("abcde") for _ in range(rng.randint(0, 12))] for _ in range(rng.randint(1, 5))]


@pytest.mark.parametrize("seed", range(200))
def test_matches_reference_definition(seed):
    rng = random.Random(seed)
    hyps = random_segments(rng)
    refs = [[rng.choice("abcde") for _ in range(rng.randint(0, 12))] for _ in hyps]
    for smoothing in ("exp", "none"):
        got = corpus_bleu(hyps, refs, smoothing=smoothing).score
        assert got == pytest.approx(reference_bleu(hyps, refs, smoothing), abs=1e-9)


def test_clipped_unigram_counts():
    counts = extract_counts("the the the the".split(), "the cat".split())
    assert counts.correct[0] == 1
    assert counts.total == [4, 3, 2, 1]
    assert counts.correct[1:] == [0, 0, 0]


@pytest.mark.parametrize("seed", range(20))
def test_identity_is_100(seed):
    rng = random.Random(seed)
    segments = [seg or ["x"] for seg in random_segments(rng)]
    result = corpus_bleu(segments, segments)
    assert result.score == pytest.approx(100.0)
    assert result.bp == 1.0


def test_single_token_segments_use_one_order():
    result = corpus_bleu([["a"], ["b"]], [["a"], ["b"]])
    assert result.effective_order == 1
    assert result.score == pytest.approx(100.0)


def test_orders_without_ngrams_have_no_precision():
    result = corpus_bleu([list("ab"), list("cd")], [list("ab"), list("cd")])
    assert result.precisions == (1.0, 1.0, None, None)
    assert result.effective_order == 2
    assert "100.0/100.0/-/-" in str(result)
    assert result.to_json()["precisions"] == [1.0, 1.0, None, None]


@pytest.mark.parametrize("seed", range(30))
def test_relabeling_tokens_keeps_the_score(seed):
    rng = random.Random(seed)
    hyps, refs = random_segments(rng), random_segments(rng)
    refs = (refs * len(hyps))[: len(hyps)]
    labels = list(range(5))
    rng.shuffle(labels)
    relabel = dict(zip("abcde", labels))
    renamed = corpus_bleu([[relabel[t] for t in h] for h in hyps], [[relabel[t] for t in r] for r in refs])
    assert renamed.score == corpus_bleu(hyps, refs).score


def test_brevity_penalty():
    result = corpus_bleu([["a", "b"]], [["a", "b", "c", "d"]])
    assert result.bp == pytest.approx(math.exp(-1))
    assert result.score == pytest.approx(100 * math.exp(-1))


def test_smoothing_none_zeroes_on_a_missing_order():
    hyp, ref = [list("abcd")], [list("abdc")]
    assert corpus_bleu(hyp, ref, smoothing="none").score == 0.0
    assert corpus_bleu(hyp, ref, smoothing="exp").score > 0.0


def test_empty_hypotheses_score_zero():
    result = corpus_bleu([[]], [["a"]])
    assert result.score == 0.0 and result.bp == 0.0


def test_counts_add_up():
    a = extract_counts(list("abc"), list("abd"))
    b = extract_counts(list("xy"), list("xy"))
    total = a + b
    assert total.correct == [4, 2, 0, 0]
    assert (total.sys_len, total.ref_len) == (5, 5)
    with pytest.raises(BleuError):
        a + NgramCounts.zeros(2)


@pytest.mark.parametrize(
    "hyps,refs,kwargs",
    [([], [], {}), ([["a"]], [["a"], ["b"]], {}), ([["a"]], [["a"]], {"smoothing": "floor"})],
)
def test_bleu_errors(hyps, refs, kwargs):
    with pytest.raises(BleuError):
        corpus_bleu(hyps, refs, **kwargs)


def test_score_text_form():
    text = str(score_from_counts(extract_counts(list("abcd"), list("abcd"))))
    assert text.startswith("BLEU = 100.00 100.0/100.0/100.0/100.0 (BP = 1.000")


def test_spbleu_records_tokenizer(letters_vocab):
    result = spbleu(["the cat sat"], ["the cat sat"], letters_vocab)
    assert result.tokenizer == "letters"
    assert result.score == pytest.approx(100.0)
    assert result.to_json()["tokenizer"] == "letters"
    with pytest.raises(BleuError):
        spbleu([], [], letters_vocab)


def test_spbleu_is_bleu_over_vocab_tokens(letters_vocab):
    hyps = ["the cat sat on the mat", "a dog ran home", "the thing"]
    refs = ["the cat is on the mat", "the dog ran far home", "nothing"]
    expected = corpus_bleu(
        [tokenize(letters_vocab, h) for h in hyps], [tokenize(letters_vocab, r) for r in refs]
    )
    result = spbleu(hyps, refs, letters_vocab)
    assert result.score == expected.score
    assert result.correct == expected.correct and result.total == expected.total
    assert 0.0 < result.score < 100.0
