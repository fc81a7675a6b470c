# mtforge/cleaning/pipeline.py
"""
The cleaning pipeline: heuristics, then language identification, then
semantic similarity. Every input pair is counted exactly once in the stats,
as kept (OK), as dropped under its first failing reason, or as errored.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Iterator, Optional, Sequence, Set, Tuple

from mtforge.cleaning.heuristics import (
    CleanConfig,
    DedupState,
    FilterDecision,
    FilterReason,
    heuristic_filter,
)
from mtforge.cleaning.langid import LangProfile, identify_language
from mtforge.cleaning.similarity import EmbeddingProvider, similarity_filter
from mtforge.corpus_model import SentencePair
from mtforge.errors import DataError

logger = logging.getLogger(__name__)

ERRORED = "ERRORED"

QuarantineSink = Callable[[SentencePair, FilterDecision], None]
ErroredSink = Callable[[SentencePair, Exception], None]


@dataclass
class CleanStats:
    """Per-reason counts, filled while the kept stream is consumed."""

    counts: Dict[str, int] = field(default_factory=dict)

    def add(self, key: str) -> None:
        self.counts[key] = self.counts.get(key, 0) + 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def kept(self) -> int:
        return self.counts.get(FilterReason.OK.value, 0)

    @property
    def errored(self) -> int:
        return self.counts.get(ERRORED, 0)

    @property
    def dropped(self) -> int:
        return self.total - self.kept - self.errored

    def to_dict(self) -> Dict[str, int]:
        return dict(sorted(self.counts.items()))


def _langid_decision(
    pair: SentencePair,
    profiles: Sequence[LangProfile],
    known: Set[str],
    min_margin: float,
) -> FilterDecision:
    checks = (
        (FilterReason.LANGID_SRC, pair.src_lang, pair.src_text),
        (FilterReason.LANGID_TGT, pair.tgt_lang, pair.tgt_text),
    )
    for reason, declared, text in checks:
        if declared.code not in known:
            continue
        found, margin = identify_language(text, profiles)
        if found.code != declared.code:
            return FilterDecision.drop(reason, f"identified {found.code}")
        if margin < min_margin:
            return FilterDecision.drop(reason, f"margin {margin:.4f}")
    return FilterDecision.ok()


def run_pipeline(
    pairs: Iterable[SentencePair],
    cfg: CleanConfig,
    profiles: Optional[Sequence[LangProfile]] = None,
    embed: Optional[EmbeddingProvider] = None,
    quarantine: Optional[QuarantineSink] = None,
    on_error: Optional[ErroredSink] = None,
) -> Tuple[Iterator[SentencePair], CleanStats]:
    """
    Clean a stream of pairs.

    Returns the kept stream (lazy, input order preserved) and a CleanStats
    object that is complete once the stream is exhausted. Languages without a
    profile skip the language-ID check; the similarity stage runs only when
    `embed` is given.
    """
    stats = CleanStats()
    profiles = list(profiles or [])
    known = {p.lang.code for p in profiles}

    def stream() -> Iterator[SentencePair]:
        seen = DedupState()
        unprofiled: Set[str] = set()
        for pair in pairs:
            try:
                decision = heuristic_filter(pair, cfg, seen)
                if decision.kept and profiles:
                    for lang in (pair.src_lang, pair.tgt_lang):
                        if lang.code not in known and lang.code not in unprofiled:
                            unprofiled.add(lang.code)
                            logger.info("no language profile for %s; language ID skipped", lang.code)
                    decision = _langid_decision(pair, profiles, known, cfg.langid_min_margin)
                if decision.kept and embed is not None:
                    decision = similarity_filter(pair, embed, cfg.sim_threshold)
            except DataError as e:
                stats.add(ERRORED)
                logger.debug("pair errored: %s", e)
                if on_error is not None:
                    on_error(pair, e)
                continue

            stats.add(decision.reason.value)
            if decision.kept:
                yield pair
            else:
                logger.debug("dropped %s: %s %s", pair.direction, decision.reason.value, decision.detail or "")
                if quarantine is not None:
                    quarantine(pair, decision)
        logger.info("cleaning done: %d in, %d kept, %d errored", stats.total, stats.kept, stats.errored)

    return stream(), stats
