# mtforge/cleaning/__init__.py
from mtforge.cleaning.heuristics import (
    CleanConfig,
    DedupState,
    FilterDecision,
    FilterReason,
    dedup_key,
    heuristic_filter,
)
from mtforge.cleaning.langid import (
    LangProfile,
    identify_language,
    load_profiles,
    save_profiles,
    train_langid,
)
from mtforge.cleaning.pipeline import CleanStats, run_pipeline
from mtforge.cleaning.similarity import (
    EmbeddingProvider,
    HashingEmbedder,
    PrecomputedEmbedder,
    SubprocessEmbedder,
    cosine,
    similarity_filter,
)

__all__ = [
    "CleanConfig",
    "CleanStats",
    "DedupState",
    "EmbeddingProvider",
    "FilterDecision",
    "FilterReason",
    "HashingEmbedder",
    "LangProfile",
    "PrecomputedEmbedder",
    "SubprocessEmbedder",
    "cosine",
    "dedup_key",
    "heuristic_filter",
    "identify_language",
    "load_profiles",
    "run_pipeline",
    "save_profiles",
    "similarity_filter",
    "train_langid",
]
