# mtforge/tokenization.py
"""
Pluggable vocab tokenizers and the tokenizer-efficiency (length ratio) metric.

A tokenizer is an ordered piece inventory matched greedily, longest piece
first, left to right. Unmatched code points fall back to one token per UTF-8
byte when the vocab allows it. Counts from exported SentencePiece inventories
approximate, but do not reproduce, the original segmentation.
"""

import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from mtforge.corpus_model import ENGLISH, display_names, get_language, load_registry
from mtforge.errors import (
    AlignmentError,
    LanguageSetMismatchError,
    TokenizationError,
    VocabError,
    ZeroLengthError,
)
from mtforge.utils.config_loader import load_published_csv

logger = logging.getLogger(__name__)

DEFAULT_MARKER = "▁"
CONTROL_PIECES = frozenset({"<unk>", "<s>", "</s>", "<pad>"})


@dataclass(frozen=True)
class VocabTokenizer:
    name: str
    pieces: Tuple[str, ...]
    byte_fallback: bool = False
    space_marker: Optional[str] = None
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)
    _max_len: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pieces = tuple(self.pieces)
        object.__setattr__(self, "pieces", pieces)
        if self.space_marker is not None and len(self.space_marker) != 1:
            raise VocabError(f"{self.name}: space marker must be a single character, got {self.space_marker!r}")
        if any(not p for p in pieces):
            raise VocabError(f"{self.name}: empty piece in vocab")
        index = {p: i for i, p in enumerate(pieces)}
        if len(index) != len(pieces):
            raise VocabError(f"{self.name}: vocab pieces must be unique")
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_max_len", max((len(p) for p in pieces), default=0))

    @property
    def vocab_size(self) -> int:
        """Pieces plus the 256 byte tokens when byte fallback is on."""
        return len(self.pieces) + (256 if self.byte_fallback else 0)

    def id_to_piece(self, token_id: int) -> str:
        if token_id < len(self.pieces):
            return self.pieces[token_id]
        return f"<0x{token_id - len(self.pieces):02X}>"


def tokenize(tok: VocabTokenizer, text: str) -> List[int]:
    """
    Greedy longest-match tokenization.

    Ids below len(tok.pieces) are piece indices; byte tokens are
    len(tok.pieces) + byte value. A literal marker character in the input
    never joins a piece; it is emitted as bytes so decode keeps it apart from
    a space.

    Raises:
        TokenizationError: no piece matches and byte fallback is off
    """
    if not text:
        return []
    marker = tok.space_marker
    literal = marker if marker and marker in text else None
    work = text.replace(" ", marker) if marker else text
    index = tok._index
    n_pieces = len(tok.pieces)
    n = len(work)
    ids: List[int] = []
    i = 0
    stop = n if literal is None else -1
    while i < n:
        if stop < i:
            stop = text.find(literal, i)
            if stop < 0:
                stop = n
        for length in range(min(tok._max_len, stop - i), 0, -1):
            piece_id = index.get(work[i:i + length])
            if piece_id is not None:
                ids.append(piece_id)
                i += length
                break
        else:
            if not tok.byte_fallback:
                raise TokenizationError(tok.name, len(text[:i].encode("utf-8")))
            ids.extend(n_pieces + b for b in text[i].encode("utf-8"))
            i += 1
    return ids


def decode(tok: VocabTokenizer, ids: Sequence[int]) -> str:
    """Inverse of tokenize: the marker inside pieces maps back to a space, byte tokens stay literal."""
    n_pieces = len(tok.pieces)
    marker = tok.space_marker
    buf = bytearray()
    for token_id in ids:
        if token_id < n_pieces:
            piece = tok.pieces[token_id]
            buf.extend((piece.replace(marker, " ") if marker else piece).encode("utf-8"))
        else:
            buf.append(token_id - n_pieces)
    return buf.decode("utf-8")


def load_vocab(path, name: Optional[str] = None) -> VocabTokenizer:
    """
    Load a vocab asset.

    Accepts one piece per line, or exported SentencePiece `.vocab` files
    (piece<TAB>score). Header directives `#byte_fallback=true` and
    `#marker=<char>` are honoured; `<0xNN>` byte pieces turn byte fallback on
    and control pieces are skipped.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise VocabError(f"cannot read vocab {path}: {e}") from e

    byte_fallback = False
    marker: Optional[str] = None
    pieces: List[str] = []
    seen = set()
    for line in raw.split("\n"):
        if line.endswith("\r"):
            line = line[:-1]
        if line.startswith("#byte_fallback="):
            byte_fallback = line.split("=", 1)[1].strip().lower() == "true"
            continue
        if line.startswith("#marker="):
            marker = line.split("=", 1)[1] or None
            continue
        piece = _strip_score(line)
        if not piece or piece in CONTROL_PIECES:
            continue
        if len(piece) == 6 and piece.startswith("<0x") and piece.endswith(">"):
            byte_fallback = True
            continue
        if piece in seen:
            logger.debug("%s: duplicate piece %r skipped", path.name, piece)
            continue
        seen.add(piece)
        pieces.append(piece)

    if not pieces and not byte_fallback:
        raise VocabError(f"vocab {path} holds no pieces")
    if marker is None and any(DEFAULT_MARKER in p for p in pieces):
        marker = DEFAULT_MARKER

    tok = VocabTokenizer(name or path.stem, tuple(pieces), byte_fallback, marker)
    logger.info("loaded vocab %s: %d pieces, byte_fallback=%s", tok.name, len(pieces), byte_fallback)
    return tok


def _strip_score(line: str) -> str:
    if "\t" in line:
        piece, _, score = line.rpartition("\t")
        try:
            float(score)
            return piece
        except ValueError:
            pass
    return line


# -- length ratio -----------------------------------------------------------

def length_ratio(tok: VocabTokenizer, x: str, y: str) -> float:
    """len(tokenize(y)) / len(tokenize(x)); x is the English sentence."""
    nx = len(tokenize(tok, x))
    if nx == 0:
        raise ZeroLengthError(f"English sentence tokenizes to zero tokens under {tok.name!r}")
    return len(tokenize(tok, y)) / nx


@dataclass
class LengthRatioReport:
    tokenizer_name: str
    english_mean_len: float
    per_lang_ratio: Dict[str, float]
    pooled_ratio: Dict[str, float] = field(default_factory=dict)
    sentences: int = 0

    @property
    def average_ratio(self) -> float:
        return statistics.fmean(self.per_lang_ratio.values()) if self.per_lang_ratio else 0.0

    @property
    def languages(self) -> List[str]:
        return sorted(self.per_lang_ratio)

    def to_json(self) -> dict:
        return {
            "tokenizer": self.tokenizer_name,
            "sentences": self.sentences,
            "english_mean_len": self.english_mean_len,
            "average_ratio": self.average_ratio,
            "per_lang_ratio": dict(sorted(self.per_lang_ratio.items())),
            "pooled_ratio": dict(sorted(self.pooled_ratio.items())),
        }


def _language_ratios(args) -> Tuple[str, float, float]:
    tok, code, sentences, english_lens = args
    lens = [len(tokenize(tok, s)) for s in sentences]
    mean_ratio = statistics.fmean(y / x for y, x in zip(lens, english_lens))
    return code, mean_ratio, sum(lens) / sum(english_lens)


def corpus_efficiency(
    tok: VocabTokenizer,
    aligned: Mapping[str, Sequence[str]],
    english: Sequence[str],
    workers: int = 1,
) -> LengthRatioReport:
    """
    Mean per-sentence length ratio for every language in `aligned`.

    `aligned[code][i]` must translate `english[i]`. English itself, when
    present in `aligned`, is skipped.
    """
    if not english:
        raise AlignmentError("English side is empty")
    codes = []
    for code in aligned:
        lang = get_language(code)
        if lang.code == ENGLISH:
            logger.warning("English listed among aligned languages; skipped")
            continue
        if len(aligned[code]) != len(english):
            raise AlignmentError(
                f"{lang.code}: {len(aligned[code])} sentences, English has {len(english)}"
            )
        codes.append(code)

    english_lens = [len(tokenize(tok, s)) for s in english]
    for i, n in enumerate(english_lens):
        if n == 0:
            raise ZeroLengthError(f"English sentence {i + 1} tokenizes to zero tokens")

    jobs = [(tok, get_language(c).code, list(aligned[c]), english_lens) for c in codes]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_language_ratios, jobs))
    else:
        results = [_language_ratios(job) for job in jobs]

    report = LengthRatioReport(
        tokenizer_name=tok.name,
        english_mean_len=statistics.fmean(english_lens),
        per_lang_ratio={code: mean for code, mean, _ in results},
        pooled_ratio={code: pooled for code, _, pooled in results},
        sentences=len(english),
    )
    logger.info("%s: average ratio %.4f over %d languages", tok.name, report.average_ratio, len(results))
    return report


# -- tables -----------------------------------------------------------------

@dataclass
class EfficiencyTable:
    """Rows: English mean length, one row per language, Average. One column per tokenizer."""

    tokenizers: List[str]
    languages: List[str]
    english_mean_len: List[float]
    ratios: Dict[str, List[float]]
    averages: List[float]

    def rows(self) -> List[Tuple[str, List[float]]]:
        names = display_names()
        out = [(names[ENGLISH], self.english_mean_len)]
        out.extend((names[code], self.ratios[code]) for code in self.languages)
        out.append(("Average", self.averages))
        return out

    def to_json(self) -> dict:
        return {
            "tokenizers": self.tokenizers,
            "english_mean_len": dict(zip(self.tokenizers, self.english_mean_len)),
            "per_lang_ratio": {
                code: dict(zip(self.tokenizers, self.ratios[code])) for code in self.languages
            },
            "average_ratio": dict(zip(self.tokenizers, self.averages)),
        }

    def render_text(self) -> str:
        header = ["Language"] + self.tokenizers
        body = [[label] + [f"{v:.2f}" for v in values] for label, values in self.rows()]
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        lines = []
        for r in [header] + body:
            cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
            lines.append("  ".join(cells).rstrip())
        return "\n".join(lines) + "\n"


def efficiency_table(reports: Sequence[LengthRatioReport]) -> EfficiencyTable:
    if not reports:
        raise LanguageSetMismatchError("no reports to tabulate")
    expected = set(reports[0].per_lang_ratio)
    for r in reports[1:]:
        if set(r.per_lang_ratio) != expected:
            diff = sorted(expected.symmetric_difference(r.per_lang_ratio))
            raise LanguageSetMismatchError(
                f"{r.tokenizer_name} covers a different language set (differs on {', '.join(diff)})"
            )
    order = [t.code for t in load_registry() if t.code in expected]
    return EfficiencyTable(
        tokenizers=[r.tokenizer_name for r in reports],
        languages=order,
        english_mean_len=[r.english_mean_len for r in reports],
        ratios={code: [r.per_lang_ratio[code] for r in reports] for code in order},
        averages=[r.average_ratio for r in reports],
    )


def published_efficiency() -> Dict[str, Dict[str, float]]:
    """
    The published efficiency table: tokenizer -> {"English": mean length,
    <code>: ratio, ..., "Average": ratio}.
    """
    by_name = {name: code for code, name in display_names().items()}
    _, rows = load_published_csv("tokenization.csv")
    table: Dict[str, Dict[str, float]] = {}
    for row in rows:
        label = row.pop("language")
        key = label if label in ("English", "Average") else by_name[label]
        for tokenizer, value in row.items():
            table.setdefault(tokenizer, {})[key] = float(value)
    return table
