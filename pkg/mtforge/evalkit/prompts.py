# mtforge/evalkit/prompts.py
"""
In-context prompts in the "<X>=<Y>" line format.

k exemplar lines "x=y" are followed by the query line "query=". A newline in
any text and an "=" on the source side would break the format, so they are
replaced by U+2028 and U+FF1D respectively; parse_icl_prompt reverses this.
Texts that already contain those two characters do not round-trip.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from mtforge.errors import PromptError
from mtforge.utils.rng import shuffled_indices

EQUALS_SENTINEL = "\uff1d"
NEWLINE_SENTINEL = "\u2028"
DEFAULT_K = 8


@dataclass(frozen=True)
class IclPrompt:
    exemplars: Tuple[Tuple[str, str], ...]
    query_src: str
    rendered: str


def escape_source(text: str) -> str:
    return text.replace("\n", NEWLINE_SENTINEL).replace("=", EQUALS_SENTINEL)


def escape_target(text: str) -> str:
    return text.replace("\n", NEWLINE_SENTINEL)


def unescape(text: str) -> str:
    return text.replace(NEWLINE_SENTINEL, "\n").replace(EQUALS_SENTINEL, "=")


def build_icl_prompt(exemplars: Sequence[Tuple[str, str]], query_src: str, k: int = DEFAULT_K) -> IclPrompt:
    if len(exemplars) != k:
        raise PromptError(f"expected {k} exemplars, got {len(exemplars)}")
    lines = [f"{escape_source(x)}={escape_target(y)}" for x, y in exemplars]
    lines.append(f"{escape_source(query_src)}=")
    return IclPrompt(tuple((x, y) for x, y in exemplars), query_src, "\n".join(lines))


def parse_icl_prompt(rendered: str) -> IclPrompt:
    lines = rendered.split("\n")
    query_line = lines[-1]
    if not query_line.endswith("=") or "=" in query_line[:-1]:
        raise PromptError("last line must be the query followed by a single '='")
    exemplars = []
    for i, line in enumerate(lines[:-1], start=1):
        x, sep, y = line.partition("=")
        if not sep:
            raise PromptError(f"exemplar line {i} has no '='")
        exemplars.append((unescape(x), unescape(y)))
    return IclPrompt(tuple(exemplars), unescape(query_line[:-1]), rendered)


def select_exemplar_indices(pool_size: int, k: int, seed: int) -> List[int]:
    """The same k indices for any direction drawn from an aligned pool."""
    if k > pool_size:
        raise PromptError(f"cannot pick {k} exemplars from a pool of {pool_size}")
    return shuffled_indices(pool_size, seed, "icl_exemplars")[:k]


def select_exemplars(pool: Sequence[Tuple[str, str]], k: int, seed: int) -> List[Tuple[str, str]]:
    return [pool[i] for i in select_exemplar_indices(len(pool), k, seed)]
