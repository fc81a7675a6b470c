# mtforge/corpus_model.py
"""
Canonical data types, the 46-language registry, and streaming ingestion of
parallel and monolingual corpus files.

Parsers are pure per record: they yield valid records in input order and
route malformed ones to a side channel (`on_error`) with the line number and
a short reason. Texts are kept verbatim; no Unicode normalization happens here.
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from mtforge.errors import RegistryError, UnknownLanguageError
from mtforge.utils.config_loader import load_bundled_json
from mtforge.utils.jsonl import iter_lines

logger = logging.getLogger(__name__)

REGISTRY_SIZE = 46
ENGLISH = "en"
CHINESE = "zhs"


class ResourceClass(str, Enum):
    HIGH = "High"
    MID = "Mid"
    LOW = "Low"


class StreamFormat(str, Enum):
    JSONL = "jsonl"
    TSV = "tsv"


@dataclass(frozen=True)
class LanguageTag:
    code: str
    name: str
    script: str
    family: str
    subgrouping: str
    resource_class: ResourceClass

    def __str__(self) -> str:
        return self.code


# -- registry ---------------------------------------------------------------

@lru_cache(maxsize=1)
def _registry() -> Tuple[Tuple[LanguageTag, ...], Dict[str, str]]:
    try:
        table = load_bundled_json("languages.json")
        entries = table["languages"]
        aliases = {k.lower(): v for k, v in table.get("aliases", {}).items()}
        tags = tuple(
            LanguageTag(
                code=e["code"],
                name=e["name"],
                script=e["script"],
                family=e["family"],
                subgrouping=e.get("subgrouping", ""),
                resource_class=ResourceClass(e["resource"]),
            )
            for e in entries
        )
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise RegistryError(f"bundled language table is corrupted: {e}") from e

    codes = [t.code for t in tags]
    if len(tags) != REGISTRY_SIZE or len(set(codes)) != REGISTRY_SIZE:
        raise RegistryError(
            f"bundled language table must hold {REGISTRY_SIZE} unique codes, found {len(set(codes))}"
        )
    for alias, target in aliases.items():
        if target not in codes:
            raise RegistryError(f"alias {alias!r} points at unknown code {target!r}")
    return tags, aliases


def load_registry() -> List[LanguageTag]:
    """Return the 46 registry languages in table order."""
    return list(_registry()[0])


def _by_code() -> Dict[str, LanguageTag]:
    return {t.code: t for t in _registry()[0]}


def normalize_code(code: str) -> str:
    """Apply the alias table ("zh" -> "zhs", "no" -> "nb", ...)."""
    c = code.strip()
    return _registry()[1].get(c.lower(), c)


def get_language(code: str) -> LanguageTag:
    tag = _by_code().get(normalize_code(code))
    if tag is None:
        raise UnknownLanguageError(code)
    return tag


def is_known_language(code: str) -> bool:
    return normalize_code(code) in _by_code()


def display_names() -> Dict[str, str]:
    """Code -> display name, e.g. "zhs" -> "Chinese (Simplified)"."""
    return {t.code: t.name for t in _registry()[0]}


# -- records ----------------------------------------------------------------

@dataclass(frozen=True)
class Direction:
    src: LanguageTag
    tgt: LanguageTag

    def __post_init__(self):
        if self.src.code == self.tgt.code:
            raise ValueError(f"self-direction {self.src.code}->{self.tgt.code}")

    def __str__(self) -> str:
        return f"{self.src.code}->{self.tgt.code}"

    @classmethod
    def parse(cls, text: str) -> "Direction":
        """Parse "src->tgt" (the arrow "→" is accepted too)."""
        sep = "->" if "->" in text else "→"
        parts = text.split(sep)
        if len(parts) != 2:
            raise ValueError(f"not a direction: {text!r}")
        return cls(get_language(parts[0]), get_language(parts[1]))

    @classmethod
    def of(cls, src: str, tgt: str) -> "Direction":
        return cls(get_language(src), get_language(tgt))

    def involves(self, code: str) -> bool:
        return code in (self.src.code, self.tgt.code)


@dataclass(frozen=True)
class SentencePair:
    src_lang: LanguageTag
    tgt_lang: LanguageTag
    src_text: str
    tgt_text: str
    scores: Optional[Mapping[str, float]] = None
    provenance: Optional[str] = None

    def __post_init__(self):
        if self.src_lang.code == self.tgt_lang.code:
            raise ValueError("src_lang and tgt_lang must differ")

    @property
    def direction(self) -> Direction:
        return Direction(self.src_lang, self.tgt_lang)

    @property
    def has_blank_side(self) -> bool:
        return not self.src_text.strip() or not self.tgt_text.strip()


@dataclass(frozen=True)
class MonolingualRecord:
    lang: LanguageTag
    text: str
    token_count: Optional[int] = None
    tokenizer: Optional[str] = None


@dataclass(frozen=True)
class RecordError:
    """A side-channel entry: the record at `line` was rejected for `reason`."""

    line: int
    reason: str
    detail: str = ""
    shard: int = 0

    def to_json(self) -> dict:
        return {"shard": self.shard, "line": self.line, "reason": self.reason, "detail": self.detail}


ErrorSink = Callable[[RecordError], None]


def _log_error(err: RecordError) -> None:
    logger.debug("line %d rejected: %s %s", err.line, err.reason, err.detail)


def merge_side_channels(shards: Sequence[Iterable[RecordError]]) -> List[RecordError]:
    """Merge per-shard side channels, ordered by (shard, line)."""
    merged = [e for errors in shards for e in errors]
    return sorted(merged, key=lambda e: (e.shard, e.line))


# -- JSONL canonical form ---------------------------------------------------

def pair_to_json(p: SentencePair) -> dict:
    obj = {
        "src_lang": p.src_lang.code,
        "tgt_lang": p.tgt_lang.code,
        "src_text": p.src_text,
        "tgt_text": p.tgt_text,
    }
    if p.scores is not None:
        obj["scores"] = dict(p.scores)
    if p.provenance is not None:
        obj["provenance"] = p.provenance
    return obj


def pair_from_json(obj: Mapping) -> SentencePair:
    """Build a SentencePair from its JSONL object; raises on invalid input."""
    for key in ("src_lang", "tgt_lang", "src_text", "tgt_text"):
        if key not in obj:
            raise KeyError(key)
    scores = obj.get("scores")
    if scores is not None:
        scores = {str(k): float(v) for k, v in scores.items()}
    return SentencePair(
        src_lang=get_language(obj["src_lang"]),
        tgt_lang=get_language(obj["tgt_lang"]),
        src_text=str(obj["src_text"]),
        tgt_text=str(obj["tgt_text"]),
        scores=scores,
        provenance=obj.get("provenance"),
    )


# -- stream parsers ---------------------------------------------------------

def _pair_fields(line: str, fmt: StreamFormat) -> Tuple[Optional[dict], Optional[Tuple[str, str]]]:
    """Return (fields, None) or (None, (reason, detail))."""
    if fmt == StreamFormat.TSV:
        cols = line.split("\t")
        if len(cols) != 4:
            return None, ("arity", f"expected 4 columns, got {len(cols)}")
        return dict(zip(("src_lang", "tgt_lang", "src_text", "tgt_text"), cols)), None

    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        return None, ("json", str(e))
    if not isinstance(obj, dict):
        return None, ("json", "record is not an object")
    missing = [k for k in ("src_lang", "tgt_lang", "src_text", "tgt_text") if k not in obj]
    if missing:
        return None, ("missing field", ",".join(missing))
    return obj, None


def parse_parallel_stream(
    reader,
    fmt: StreamFormat = StreamFormat.JSONL,
    on_error: Optional[ErrorSink] = None,
    shard: int = 0,
) -> Iterator[SentencePair]:
    """
    Parse a line-record stream of bitext into SentencePairs.

    Args:
        reader: a path or an iterable of lines
        fmt: JSONL (canonical) or 4-column TSV
        on_error: side channel receiving RecordError for every rejected line
        shard: shard number stamped on side-channel entries

    Yields:
        valid SentencePairs in input order
    """
    sink = on_error or _log_error
    fmt = StreamFormat(fmt)
    for lineno, line in iter_lines(reader):
        if not line.strip():
            continue
        fields, problem = _pair_fields(line, fmt)
        if problem:
            sink(RecordError(lineno, problem[0], problem[1], shard))
            continue

        unknown = [fields[k] for k in ("src_lang", "tgt_lang") if not is_known_language(str(fields[k]))]
        if unknown:
            sink(RecordError(lineno, "unknown language", ",".join(map(str, unknown)), shard))
            continue
        if normalize_code(str(fields["src_lang"])) == normalize_code(str(fields["tgt_lang"])):
            sink(RecordError(lineno, "self-direction", str(fields["src_lang"]), shard))
            continue
        if not isinstance(fields["src_text"], str) or not isinstance(fields["tgt_text"], str):
            sink(RecordError(lineno, "type", "texts must be strings", shard))
            continue
        try:
            pair = pair_from_json(fields)
        except (ValueError, TypeError, AttributeError) as e:
            sink(RecordError(lineno, "invalid", str(e), shard))
            continue
        if pair.has_blank_side:
            logger.debug("line %d: blank side kept for the cleaning stage", lineno)
        yield pair


def parse_monolingual_stream(
    reader,
    on_error: Optional[ErrorSink] = None,
    shard: int = 0,
) -> Iterator[MonolingualRecord]:
    """
    Parse monolingual records.

    Two layouts are accepted: JSONL objects {"lang", "text"[, "token_count",
    "tokenizer"]}, or plain text whose first line declares the language as
    "#lang=<code>" with one text per following line.
    """
    sink = on_error or _log_error
    declared: Optional[LanguageTag] = None
    plain = False

    for lineno, line in iter_lines(reader):
        if lineno == 1 and line.startswith("#lang="):
            code = line[len("#lang="):].strip()
            if not is_known_language(code):
                sink(RecordError(lineno, "unknown language", code, shard))
                return
            declared = get_language(code)
            plain = True
            continue

        if plain:
            if not line.strip():
                sink(RecordError(lineno, "empty", "", shard))
                continue
            yield MonolingualRecord(lang=declared, text=line)
            continue

        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            sink(RecordError(lineno, "json", str(e), shard))
            continue
        if not isinstance(obj, dict) or "lang" not in obj or "text" not in obj:
            sink(RecordError(lineno, "missing field", "lang/text", shard))
            continue
        if not is_known_language(str(obj["lang"])):
            sink(RecordError(lineno, "unknown language", str(obj["lang"]), shard))
            continue
        text = obj["text"]
        if not isinstance(text, str) or not text.strip():
            sink(RecordError(lineno, "empty", "", shard))
            continue
        token_count = obj.get("token_count")
        if token_count is not None and (not isinstance(token_count, int) or token_count < 0):
            sink(RecordError(lineno, "token_count", repr(token_count), shard))
            continue
        yield MonolingualRecord(
            lang=get_language(obj["lang"]),
            text=text,
            token_count=token_count,
            tokenizer=obj.get("tokenizer"),
        )
