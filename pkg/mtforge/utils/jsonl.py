# mtforge/utils/jsonl.py
import gzip
import io
import json
from pathlib import Path
from typing import Any, Iterable, Iterator, TextIO, Tuple, Union

from mtforge.errors import UnreadableStreamError

PathLike = Union[str, Path]


def open_text(path: PathLike) -> TextIO:
    """Open a UTF-8 text file for reading, transparently handling .gz.

    Lines are terminated by "\\n" only, so stray "\\r" or U+2028 inside a
    record never splits it.
    """
    path = str(path)
    if path.endswith(".gz"):
        return io.TextIOWrapper(gzip.GzipFile(path, "rb"), encoding="utf-8", newline="\n")
    return open(path, "r", encoding="utf-8", newline="\n")


def iter_lines(source: Union[PathLike, Iterable[str]]) -> Iterator[Tuple[int, str]]:
    """Yield (1-based line number, line without its terminator).

    `source` is a path or any iterable of lines (an open file, a list).
    Decoding failures are fatal: the stream is unreadable.
    """
    if isinstance(source, (str, Path)):
        with open_text(source) as f:
            yield from _numbered(f, str(source))
    else:
        yield from _numbered(source, "<stream>")


def _numbered(lines: Iterable[str], name: str) -> Iterator[Tuple[int, str]]:
    lineno = 0
    try:
        for lineno, line in enumerate(lines, start=1):
            if line.endswith("\n"):
                line = line[:-1]
            if line.endswith("\r"):
                line = line[:-1]
            yield lineno, line
    except (UnicodeDecodeError, OSError) as e:
        raise UnreadableStreamError(f"{name}: unreadable after line {lineno}: {e}") from e


def dumps(obj: Any) -> str:
    """Canonical one-line JSON: UTF-8 kept verbatim, no trailing spaces."""
    return json.dumps(obj, ensure_ascii=False, separators=(", ", ": "))


def write_jsonl(path: PathLike, records: Iterable[Any]) -> int:
    """Write records one per line; returns the number written."""
    count = 0
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(dumps(record))
            f.write("\n")
            count += 1
    return count


def write_json(path: PathLike, obj: Any) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path: PathLike) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
