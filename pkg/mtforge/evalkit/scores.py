# mtforge/evalkit/scores.py
"""
Score ingestion. Neural metric values (COMET, XCOMET, COMETKiwi) are never
computed here; they arrive as data, either as JSONL rows
{system, direction, metric, value} or as table transcriptions:

    # metrics=spbleu/comet
    direction,SystemA,SystemB
    en->de,40.23 / 87.32,-
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from mtforge.corpus_model import Direction
from mtforge.errors import QualityFlagError, ScoreConflictError, TableFormatError, UnknownLanguageError
from mtforge.utils.config_loader import load_published_csv, read_commented_csv
from mtforge.utils.jsonl import iter_lines

logger = logging.getLogger(__name__)

KNOWN_METRICS = ("spbleu", "comet", "xcomet", "cometkiwi")

Key = Tuple[str, str, str]


@dataclass
class ScoreMatrix:
    """(system, direction, metric) -> value, one value per key."""

    entries: Dict[Key, float] = field(default_factory=dict)
    sources: Dict[Key, str] = field(default_factory=dict)

    def add(self, system: str, direction, metric: str, value: float, source: str = "") -> None:
        key = (system, str(Direction.parse(str(direction))), metric.lower())
        value = float(value)
        if key in self.entries:
            if self.entries[key] != value:
                raise ScoreConflictError(
                    f"{key[0]} {key[1]} {key[2]}: {self.entries[key]} ({self.sources[key] or 'earlier row'}) "
                    f"vs {value} ({source or 'later row'})"
                )
            return
        if key[2] not in KNOWN_METRICS:
            logger.debug("metric %r is not one of %s", key[2], ", ".join(KNOWN_METRICS))
        self.entries[key] = value
        self.sources[key] = source

    def get(self, system: str, direction, metric: str) -> Optional[float]:
        return self.entries.get((system, str(direction), metric.lower()))

    def systems(self) -> List[str]:
        return sorted({k[0] for k in self.entries})

    def directions(self) -> List[str]:
        return sorted({k[1] for k in self.entries})

    def metrics(self) -> List[str]:
        return sorted({k[2] for k in self.entries})

    def merge(self, other: "ScoreMatrix") -> "ScoreMatrix":
        merged = ScoreMatrix(dict(self.entries), dict(self.sources))
        for key, value in other.entries.items():
            merged.add(*key, value, other.sources.get(key, ""))
        return merged

    def __len__(self) -> int:
        return len(self.entries)

    def to_records(self) -> List[dict]:
        return [
            {"system": s, "direction": d, "metric": m, "value": v}
            for (s, d, m), v in sorted(self.entries.items())
        ]


def _parse_cell(cell: str, n_metrics: int, where: str) -> List[Optional[float]]:
    cell = cell.strip()
    if cell in ("", "-"):
        return [None] * n_metrics
    parts = [p.strip() for p in cell.split("/")]
    if len(parts) != n_metrics:
        raise TableFormatError(f"{where}: expected {n_metrics} values in {cell!r}")
    try:
        return [None if p == "-" else float(p) for p in parts]
    except ValueError as e:
        raise TableFormatError(f"{where}: {e}") from e


def add_transcription(
    matrix: ScoreMatrix, comments: Sequence[str], rows: Sequence[Mapping[str, str]], source: str
) -> None:
    metrics = None
    for comment in comments:
        if comment.startswith("metrics="):
            metrics = [m.strip().lower() for m in comment[len("metrics="):].split("/")]
    if not metrics:
        raise TableFormatError(f"{source}: missing '# metrics=a/b' header line")
    for i, row in enumerate(rows, start=2 + len(comments)):
        direction = row.get("direction")
        if not direction:
            raise TableFormatError(f"{source}:{i}: missing direction")
        try:
            direction = str(Direction.parse(direction))
        except (ValueError, UnknownLanguageError) as e:
            raise TableFormatError(f"{source}:{i}: bad direction {direction!r}: {e}") from e
        for system, cell in row.items():
            if system in (None, "direction") or cell is None:
                continue
            for metric, value in zip(metrics, _parse_cell(cell, len(metrics), f"{source}:{i}")):
                if value is not None:
                    matrix.add(system, direction, metric, value, f"{source}:{i}")


def _add_jsonl(matrix: ScoreMatrix, path: Path) -> None:
    for lineno, line in iter_lines(path):
        if not line.strip():
            continue
        where = f"{path}:{lineno}"
        try:
            obj = json.loads(line)
            matrix.add(obj["system"], obj["direction"], obj["metric"], obj["value"], where)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise TableFormatError(f"{where}: bad score row: {e}") from e


def ingest_scores(files: Iterable) -> ScoreMatrix:
    """Merge score files (.csv transcriptions, anything else JSONL) into one matrix."""
    matrix = ScoreMatrix()
    for f in files:
        path = Path(f)
        if path.suffix.lower() == ".csv":
            comments, rows = read_commented_csv(path)
            add_transcription(matrix, comments, rows, str(path))
        else:
            _add_jsonl(matrix, path)
    logger.info("ingested %d score entries", len(matrix))
    return matrix


def load_published_scores(name: str) -> ScoreMatrix:
    """One of the bundled transcriptions, e.g. "flores_gemma_en.csv"."""
    matrix = ScoreMatrix()
    comments, rows = load_published_csv(name)
    add_transcription(matrix, comments, rows, name)
    return matrix


# -- WMT low-quality exclusion ---------------------------------------------

QUALITY_FLAG = "low_quality"


@dataclass
class QualityReport:
    kept: int = 0
    dropped: int = 0
    missing_flag: int = 0

    def to_json(self) -> dict:
        return {"kept": self.kept, "dropped": self.dropped, "missing_flag": self.missing_flag}


def wmt_ingest(
    records: Iterable[Mapping], missing_flag: str = "keep"
) -> Tuple[Iterator[Mapping], QualityReport]:
    """
    Drop records flagged low quality. A record without the flag is kept
    (missing_flag="keep") or rejected (missing_flag="error").
    """
    if missing_flag not in ("keep", "error"):
        raise QualityFlagError(f"missing_flag must be 'keep' or 'error', got {missing_flag!r}")
    report = QualityReport()

    def stream() -> Iterator[Mapping]:
        for i, rec in enumerate(records, start=1):
            flag = rec.get(QUALITY_FLAG)
            if flag is None:
                if missing_flag == "error":
                    raise QualityFlagError(f"record {i} has no {QUALITY_FLAG!r} flag")
                report.missing_flag += 1
                flag = False
            if not isinstance(flag, bool):
                raise QualityFlagError(f"record {i}: {QUALITY_FLAG!r} must be a boolean, got {flag!r}")
            if flag:
                report.dropped += 1
                continue
            report.kept += 1
            yield rec
        if report.dropped and not report.kept:
            logger.warning("every record was flagged low quality; nothing left to score")
        elif report.dropped:
            logger.info("excluded %d low-quality records", report.dropped)

    return stream(), report
