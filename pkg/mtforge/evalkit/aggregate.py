# mtforge/evalkit/aggregate.py
import logging
import statistics
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from mtforge.corpus_model import CHINESE, ENGLISH, Direction, load_registry
from mtforge.errors import GroupError
from mtforge.evalkit.scores import ScoreMatrix
from mtforge.utils.jsonl import read_json

logger = logging.getLogger(__name__)


class GroupName(str, Enum):
    EN2XX = "en->xx"
    XX2EN = "xx->en"
    ZH2XX = "zh->xx"
    XX2ZH = "xx->zh"


@dataclass(frozen=True)
class DirectionGroup:
    name: GroupName
    members: Tuple[Direction, ...]

    def __post_init__(self):
        if not self.members:
            raise GroupError(f"group {self.name.value} has no members")
        keys = [str(d) for d in self.members]
        if len(set(keys)) != len(keys):
            dupes = sorted({k for k in keys if keys.count(k) > 1})
            raise GroupError(f"group {self.name.value} repeats {', '.join(dupes)}")


def default_groups() -> List[DirectionGroup]:
    """
    en->xx / xx->en over every other registry language; zh->xx / xx->zh over
    every language other than zhs, English and the other Chinese varieties
    included.
    """
    codes = [t.code for t in load_registry()]

    def outward(pivot: str) -> Tuple[Direction, ...]:
        return tuple(Direction.of(pivot, c) for c in codes if c != pivot)

    def inward(pivot: str) -> Tuple[Direction, ...]:
        return tuple(Direction.of(c, pivot) for c in codes if c != pivot)

    return [
        DirectionGroup(GroupName.EN2XX, outward(ENGLISH)),
        DirectionGroup(GroupName.XX2EN, inward(ENGLISH)),
        DirectionGroup(GroupName.ZH2XX, outward(CHINESE)),
        DirectionGroup(GroupName.XX2ZH, inward(CHINESE)),
    ]


def load_groups(path) -> List[DirectionGroup]:
    """JSON {"en->xx": ["en->de", ...], ...}; keys must be group names."""
    try:
        data = read_json(path)
    except (OSError, ValueError) as e:
        raise GroupError(f"cannot read groups from {path}: {e}") from e
    groups = []
    for name, members in data.items():
        try:
            group_name = GroupName(name)
        except ValueError:
            raise GroupError(f"unknown group {name!r}") from None
        try:
            directions = tuple(Direction.parse(m) for m in members)
        except ValueError as e:
            raise GroupError(f"group {name}: {e}") from e
        groups.append(DirectionGroup(group_name, directions))
    return groups


@dataclass
class GroupedTable:
    systems: List[str]
    groups: List[str]
    metrics: List[str]
    cells: Dict[Tuple[str, str, str], Optional[float]]
    missing: List[Tuple[str, str, str]] = field(default_factory=list)

    def get(self, system: str, group, metric: str) -> Optional[float]:
        group = group.value if isinstance(group, GroupName) else group
        return self.cells.get((system, group, metric))

    def cell_text(self, system: str, group: str, digits: int = 2) -> str:
        values = [self.cells.get((system, group, m)) for m in self.metrics]
        return " / ".join("-" if v is None else f"{v:.{digits}f}" for v in values)

    def to_json(self) -> dict:
        return {
            "metrics": self.metrics,
            "groups": self.groups,
            "rows": {
                s: {g: {m: self.cells.get((s, g, m)) for m in self.metrics} for g in self.groups}
                for s in self.systems
            },
            "missing": [{"system": s, "direction": d, "metric": m} for s, d, m in self.missing],
        }

    def render_text(self) -> str:
        header = [" / ".join(self.metrics)] + self.groups
        body = [[s] + [self.cell_text(s, g) for g in self.groups] for s in self.systems]
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        lines = [
            "  ".join([r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])])
            for r in [header] + body
        ]
        if self.missing:
            lines.append(f"{len(self.missing)} missing score(s); affected cells shown as '-'")
        return "\n".join(lines) + "\n"


def aggregate(
    matrix: ScoreMatrix,
    groups: Sequence[DirectionGroup],
    systems: Optional[Sequence[str]] = None,
    metrics: Optional[Sequence[str]] = None,
) -> GroupedTable:
    """
    Unweighted mean over group members per (system, group, metric). A cell
    with any missing member score is left empty and the gaps are listed.
    """
    if not groups:
        raise GroupError("no direction groups given")
    systems = list(systems) if systems else matrix.systems()
    metrics = [m.lower() for m in metrics] if metrics else matrix.metrics()

    cells: Dict[Tuple[str, str, str], Optional[float]] = {}
    missing: List[Tuple[str, str, str]] = []
    for system in systems:
        for group in groups:
            for metric in metrics:
                values = []
                for d in group.members:
                    v = matrix.get(system, d, metric)
                    if v is None:
                        missing.append((system, str(d), metric))
                    else:
                        values.append(v)
                complete = len(values) == len(group.members)
                cells[(system, group.name.value, metric)] = statistics.fmean(values) if complete else None
    if missing:
        logger.warning("%d scores missing; affected cells left empty", len(missing))
    return GroupedTable(systems, [g.name.value for g in groups], metrics, cells, missing)
