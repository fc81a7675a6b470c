# mtforge/evalkit/__init__.py
from mtforge.evalkit.aggregate import (
    DirectionGroup,
    GroupedTable,
    GroupName,
    aggregate,
    default_groups,
    load_groups,
)
from mtforge.evalkit.bleu import BleuScore, NgramCounts, corpus_bleu, extract_counts, spbleu
from mtforge.evalkit.prompts import (
    IclPrompt,
    build_icl_prompt,
    parse_icl_prompt,
    select_exemplars,
)
from mtforge.evalkit.scores import ScoreMatrix, ingest_scores, load_published_scores, wmt_ingest

__all__ = [
    "BleuScore",
    "DirectionGroup",
    "GroupName",
    "GroupedTable",
    "IclPrompt",
    "NgramCounts",
    "ScoreMatrix",
    "aggregate",
    "build_icl_prompt",
    "corpus_bleu",
    "default_groups",
    "extract_counts",
    "ingest_scores",
    "load_groups",
    "load_published_scores",
    "parse_icl_prompt",
    "select_exemplars",
    "spbleu",
    "wmt_ingest",
]
