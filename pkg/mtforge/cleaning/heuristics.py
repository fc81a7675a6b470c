# mtforge/cleaning/heuristics.py
import hashlib
import threading
import unicodedata
from dataclasses import asdict, dataclass, fields
from enum import Enum
from typing import Optional

from mtforge.corpus_model import SentencePair
from mtforge.errors import CleanConfigError


class FilterReason(str, Enum):
    OK = "OK"
    EMPTY = "EMPTY"
    TOO_LONG = "TOO_LONG"
    LENGTH_RATIO = "LENGTH_RATIO"
    DUPLICATE = "DUPLICATE"
    LANGID_SRC = "LANGID_SRC"
    LANGID_TGT = "LANGID_TGT"
    LOW_SIMILARITY = "LOW_SIMILARITY"
    CONTROL_CHARS = "CONTROL_CHARS"
    DIGIT_PUNCT_RATIO = "DIGIT_PUNCT_RATIO"


@dataclass(frozen=True)
class FilterDecision:
    kept: bool
    reason: FilterReason
    detail: Optional[str] = None

    def __post_init__(self):
        if self.kept != (self.reason == FilterReason.OK):
            raise ValueError(f"kept={self.kept} contradicts reason {self.reason.value}")

    @classmethod
    def ok(cls) -> "FilterDecision":
        return cls(True, FilterReason.OK)

    @classmethod
    def drop(cls, reason: FilterReason, detail: Optional[str] = None) -> "FilterDecision":
        return cls(False, reason, detail)


@dataclass(frozen=True)
class CleanConfig:
    max_chars: int = 2000
    max_len_ratio: float = 3.0
    min_chars: int = 1
    max_digit_punct_ratio: float = 0.5
    langid_min_margin: float = 0.05
    sim_threshold: float = 0.75
    dedup: bool = True

    def __post_init__(self):
        if self.max_len_ratio < 1:
            raise CleanConfigError(f"max_len_ratio must be >= 1, got {self.max_len_ratio}")
        if not 0 <= self.sim_threshold <= 1:
            raise CleanConfigError(f"sim_threshold must lie in [0, 1], got {self.sim_threshold}")
        if self.min_chars < 0 or self.max_chars < max(self.min_chars, 1):
            raise CleanConfigError(
                f"need 0 <= min_chars <= max_chars, got {self.min_chars} / {self.max_chars}"
            )
        if not 0 <= self.max_digit_punct_ratio <= 1:
            raise CleanConfigError("max_digit_punct_ratio must lie in [0, 1]")
        if not 0 <= self.langid_min_margin <= 1:
            raise CleanConfigError("langid_min_margin must lie in [0, 1]")

    @classmethod
    def from_dict(cls, data: dict) -> "CleanConfig":
        known = {f.name for f in fields(cls)}
        try:
            return cls(**{k: v for k, v in data.items() if k in known})
        except TypeError as e:
            raise CleanConfigError(str(e)) from e

    def to_dict(self) -> dict:
        return asdict(self)


def normalize_for_dedup(text: str) -> str:
    """NFC, whitespace collapsed, case preserved."""
    return " ".join(unicodedata.normalize("NFC", text).split())


def dedup_key(pair: SentencePair) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(normalize_for_dedup(pair.src_text).encode("utf-8"))
    h.update(b"\x00")
    h.update(normalize_for_dedup(pair.tgt_text).encode("utf-8"))
    return int.from_bytes(h.digest(), "big")


class DedupState:
    """Set of seen pair hashes; the first inserter wins."""

    def __init__(self):
        self._seen = set()
        self._lock = threading.Lock()

    def insert_if_absent(self, key: int) -> bool:
        with self._lock:
            if key in self._seen:
                return False
            self._seen.add(key)
            return True

    def __contains__(self, key: int) -> bool:
        return key in self._seen

    def __len__(self) -> int:
        return len(self._seen)


def _has_control_chars(text: str) -> bool:
    return any(ord(ch) < 0x20 and ch != "\t" for ch in text)


def digit_punct_ratio(text: str) -> float:
    """Share of non-whitespace characters that are digits or punctuation."""
    chars = [ch for ch in text if not ch.isspace()]
    if not chars:
        return 0.0
    hits = sum(1 for ch in chars if unicodedata.category(ch)[0] in ("N", "P"))
    return hits / len(chars)


def heuristic_filter(p: SentencePair, cfg: CleanConfig, seen: Optional[DedupState]) -> FilterDecision:
    """
    Apply the heuristic rules in order; the first failing rule is the reason.
    A pair passing every rule has its dedup hash inserted into `seen`.
    """
    src, tgt = p.src_text.strip(), p.tgt_text.strip()

    for side, text in (("src", src), ("tgt", tgt)):
        if not text or len(text) < cfg.min_chars:
            return FilterDecision.drop(FilterReason.EMPTY, side)

    for side, text in (("src", p.src_text), ("tgt", p.tgt_text)):
        if _has_control_chars(text):
            return FilterDecision.drop(FilterReason.CONTROL_CHARS, side)

    for side, text in (("src", p.src_text), ("tgt", p.tgt_text)):
        if len(text) > cfg.max_chars:
            return FilterDecision.drop(FilterReason.TOO_LONG, f"{side}:{len(text)}")

    for side, text in (("src", src), ("tgt", tgt)):
        ratio = digit_punct_ratio(text)
        if ratio > cfg.max_digit_punct_ratio:
            return FilterDecision.drop(FilterReason.DIGIT_PUNCT_RATIO, f"{side}:{ratio:.3f}")

    ratio = max(len(src), len(tgt)) / min(len(src), len(tgt))
    if ratio > cfg.max_len_ratio:
        return FilterDecision.drop(FilterReason.LENGTH_RATIO, f"{ratio:.3f}")

    if cfg.dedup and seen is not None and not seen.insert_if_absent(dedup_key(p)):
        return FilterDecision.drop(FilterReason.DUPLICATE)

    return FilterDecision.ok()
