# mtforge/cleaning/langid.py
"""
Character n-gram rank profiles for language identification.

Each profile keeps the top-K character 1..3-grams of its training text,
ranked 1..K by frequency (ties broken lexicographically). A text is scored
against every profile by the out-of-place distance: the sum over the text's
own ranked n-grams of |rank in text - rank in profile|, with a flat K+1 for
n-grams the profile lacks.
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

from mtforge.corpus_model import LanguageTag, get_language
from mtforge.errors import CleanConfigError, LangIdError
from mtforge.utils.jsonl import read_json, write_json

logger = logging.getLogger(__name__)

MIN_K = 50
NGRAM_ORDERS = (1, 2, 3)


@dataclass(frozen=True)
class LangProfile:
    lang: LanguageTag
    ranks: Mapping[str, int]
    k: int

    def to_json(self) -> dict:
        return {"lang": self.lang.code, "ranks": dict(self.ranks)}


def char_ngrams(texts: Iterable[str]) -> Counter:
    counts: Counter = Counter()
    for text in texts:
        padded = " " + " ".join(text.split()) + " "
        for n in NGRAM_ORDERS:
            for i in range(len(padded) - n + 1):
                gram = padded[i:i + n]
                if gram != " " * n:
                    counts[gram] += 1
    return counts


def rank_ngrams(counts: Counter, k: int) -> Dict[str, int]:
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return {gram: rank for rank, (gram, _) in enumerate(ordered, start=1)}


def train_langid(samples: Mapping[str, Sequence[str]], k: int = 300) -> List[LangProfile]:
    """Build one profile per language, in sorted code order."""
    if k < MIN_K:
        raise CleanConfigError(f"langid K must be >= {MIN_K}, got {k}")
    if not samples:
        raise CleanConfigError("language-ID training needs at least one language")

    profiles = []
    for code in sorted(samples, key=lambda c: get_language(c).code):
        texts = [t for t in samples[code] if t.strip()]
        if not texts:
            raise CleanConfigError(f"no nonempty training samples for {code}")
        ranks = rank_ngrams(char_ngrams(texts), k)
        profiles.append(LangProfile(get_language(code), ranks, k))
        logger.debug("profile %s: %d n-grams", code, len(ranks))
    return profiles


def _distance(text_ranks: Mapping[str, int], profile: LangProfile) -> int:
    missing = profile.k + 1
    total = 0
    for gram, rank in text_ranks.items():
        other = profile.ranks.get(gram)
        total += missing if other is None else abs(rank - other)
    return total


def identify_language(text: str, profiles: Sequence[LangProfile]) -> Tuple[LanguageTag, float]:
    """
    Returns (best language, margin) with margin = (second - best) / second.
    A single profile always yields margin 1.0.
    """
    if not profiles:
        raise LangIdError("no language profiles supplied")
    if not text.strip():
        raise LangIdError("cannot identify the language of an empty text")

    k = max(p.k for p in profiles)
    text_ranks = rank_ngrams(char_ngrams([text]), k)
    scored = sorted((_distance(text_ranks, p), p.lang.code, p.lang) for p in profiles)
    best_dist, _, best = scored[0]
    if len(scored) == 1:
        return best, 1.0
    second_dist = scored[1][0]
    margin = (second_dist - best_dist) / second_dist if second_dist else 0.0
    return best, margin


def save_profiles(path, profiles: Sequence[LangProfile]) -> None:
    k = profiles[0].k if profiles else MIN_K
    write_json(path, {"k": k, "profiles": [p.to_json() for p in profiles]})


def load_profiles(path) -> List[LangProfile]:
    try:
        data = read_json(path)
        k = int(data["k"])
        return [LangProfile(get_language(p["lang"]), dict(p["ranks"]), k) for p in data["profiles"]]
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise CleanConfigError(f"cannot load language profiles from {path}: {e}") from e
