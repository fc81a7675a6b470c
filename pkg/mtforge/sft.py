# mtforge/sft.py
"""
Supervised fine-tuning set construction from QE-scored candidate translations.

Per source segment the best candidate under a reference-free quality metric
is chosen, kept only when its score reaches the policy threshold, and turned
into an instruction record.
"""

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from mtforge.corpus_model import CHINESE, ENGLISH, Direction, display_names
from mtforge.errors import (
    DataError,
    MissingDisplayNameError,
    PolicyError,
    PromptError,
    SampleSizeError,
    SelectionError,
)
from mtforge.utils.config_loader import load_bundled_json, load_published_csv
from mtforge.utils.rng import shuffled_indices

logger = logging.getLogger(__name__)

# declared score ranges; metrics not listed are unbounded
METRIC_RANGES = {
    "xcomet": (0.0, 1.0),
    "cometkiwi": (0.0, 1.0),
    "comet": (0.0, 1.0),
}

_MEAN = re.compile(r"^mean\(\s*([^()]+?)\s*\)$")
_NAME = re.compile(r"^[A-Za-z0-9_\-.]+$")


@dataclass(frozen=True)
class Candidate:
    text: str
    generator: str
    scores: Mapping[str, float]


@dataclass(frozen=True)
class CandidateSet:
    direction: Direction
    src_text: str
    candidates: Tuple[Candidate, ...]


@dataclass(frozen=True)
class SelectionPolicy:
    metric: str = "mean(xcomet,cometkiwi)"
    threshold: float = 0.85
    tie_break: str = "FirstIndex"
    components: Tuple[str, ...] = field(init=False, compare=False)

    def __post_init__(self):
        spec = self.metric.strip()
        m = _MEAN.match(spec)
        names = [n.strip() for n in m.group(1).split(",")] if m else [spec]
        if not names or not all(_NAME.match(n) for n in names):
            raise PolicyError(f"cannot resolve metric {self.metric!r}")
        object.__setattr__(self, "components", tuple(names))
        if self.tie_break != "FirstIndex":
            raise PolicyError(f"unsupported tie break {self.tie_break!r}")
        low, high = self.range
        if not (low <= self.threshold <= high) or math.isnan(self.threshold):
            raise PolicyError(f"threshold {self.threshold} outside {self.metric} range [{low}, {high}]")

    @property
    def range(self) -> Tuple[float, float]:
        bounds = [METRIC_RANGES.get(n, (-math.inf, math.inf)) for n in self.components]
        return min(b[0] for b in bounds), max(b[1] for b in bounds)

    def resolve(self, cand: Candidate, index: int) -> float:
        values = []
        for name in self.components:
            if name not in cand.scores:
                raise SelectionError(f"candidate {index} ({cand.generator}) has no {name!r} score")
            values.append(float(cand.scores[name]))
        return sum(values) / len(values)

    def to_dict(self) -> dict:
        return {"metric": self.metric, "threshold": self.threshold, "tie_break": self.tie_break}


@dataclass(frozen=True)
class SftRecord:
    direction: Direction
    prompt: str
    completion: str
    score: float
    generator: str

    def to_json(self) -> dict:
        return {
            "direction": str(self.direction),
            "prompt": self.prompt,
            "completion": self.completion,
            "score": self.score,
            "generator": self.generator,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "SftRecord":
        try:
            return cls(
                direction=Direction.parse(obj["direction"]),
                prompt=str(obj["prompt"]),
                completion=str(obj["completion"]),
                score=float(obj["score"]),
                generator=str(obj.get("generator", "")),
            )
        except (KeyError, TypeError, AttributeError, ValueError) as e:
            raise SelectionError(f"malformed SFT record: {e}") from e


def parse_candidate_set(obj: Mapping) -> CandidateSet:
    """
    Accepts {"direction": "en->de"} or {"src_lang", "tgt_lang"} plus
    "src_text" and "candidates": [{"text", "generator", "scores"}].
    """
    try:
        if "direction" in obj:
            direction = Direction.parse(obj["direction"])
        else:
            direction = Direction.of(obj["src_lang"], obj["tgt_lang"])
        candidates = tuple(
            Candidate(
                text=str(c["text"]),
                generator=str(c.get("generator", "")),
                scores={str(k): float(v) for k, v in c.get("scores", {}).items()},
            )
            for c in obj["candidates"]
        )
        return CandidateSet(direction, str(obj["src_text"]), candidates)
    except (KeyError, TypeError, AttributeError, ValueError) as e:
        raise SelectionError(f"malformed candidate set: {e}") from e


def select_best(cs: CandidateSet, policy: SelectionPolicy) -> Tuple[int, float]:
    """Argmax of the resolved metric; the lowest index wins ties."""
    if not cs.candidates:
        raise SelectionError(f"{cs.direction}: no candidates")
    best_index, best_score = 0, policy.resolve(cs.candidates[0], 0)
    for i, cand in enumerate(cs.candidates[1:], start=1):
        score = policy.resolve(cand, i)
        if score > best_score:
            best_index, best_score = i, score
    return best_index, best_score


def threshold_filter(selected: Tuple[Candidate, float], tau: float) -> bool:
    """Kept iff score >= tau."""
    return selected[1] >= tau


# -- instruction template ---------------------------------------------------

def _name(names: Mapping[str, str], code: str) -> str:
    try:
        return names[code]
    except KeyError:
        raise MissingDisplayNameError(f"no display name for {code!r}") from None


def format_instruction(
    d: Direction,
    src: str,
    tgt: Optional[str] = None,
    names: Optional[Mapping[str, str]] = None,
) -> str:
    names = display_names() if names is None else names
    s, t = _name(names, d.src.code), _name(names, d.tgt.code)
    prompt = f"Translate this from {s} to {t}:\n{s}: {src}\n{t}:"
    return prompt if tgt is None else prompt + tgt


_INSTRUCTION = re.compile(r"\ATranslate this from (.+?) to (.+?):\n\1: (.*)\n\2:(.*)\Z", re.DOTALL)


def parse_instruction(
    prompt: str, names: Optional[Mapping[str, str]] = None
) -> Tuple[Direction, str, Optional[str]]:
    """Split an instruction back into (direction, src, tgt); tgt is None for the inference form."""
    names = display_names() if names is None else names
    m = _INSTRUCTION.match(prompt)
    if not m:
        raise PromptError("not an instruction prompt")
    by_name = {v: k for k, v in names.items()}
    try:
        direction = Direction.of(by_name[m.group(1)], by_name[m.group(2)])
    except KeyError as e:
        raise PromptError(f"unknown language name {e}") from None
    return direction, m.group(3), m.group(4) or None


# -- distribution -----------------------------------------------------------

@dataclass
class DistributionReport:
    counts: Dict[str, int] = field(default_factory=dict)
    inputs: int = 0
    below_threshold: int = 0
    errored: int = 0
    policy: Optional[dict] = None
    training_meta: Optional[Dict[str, str]] = None

    def add(self, direction: Direction) -> None:
        key = str(direction)
        self.counts[key] = self.counts.get(key, 0) + 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def directions(self) -> int:
        return sum(1 for c in self.counts.values() if c > 0)

    def _share(self, code: str) -> float:
        total = self.total
        if not total:
            return 0.0
        return sum(c for d, c in self.counts.items() if code in d.split("->")) / total

    @property
    def en_centric_share(self) -> float:
        return self._share(ENGLISH)

    @property
    def zhs_centric_share(self) -> float:
        return self._share(CHINESE)

    @property
    def overlap(self) -> int:
        """Pairs counted in both shares: en->zhs plus zhs->en."""
        return self.counts.get(f"{ENGLISH}->{CHINESE}", 0) + self.counts.get(f"{CHINESE}->{ENGLISH}", 0)

    @property
    def zhs_non_english(self) -> int:
        return sum(
            c for d, c in self.counts.items() if CHINESE in d.split("->") and ENGLISH not in d.split("->")
        )

    def merge(self, other: "DistributionReport") -> "DistributionReport":
        counts = dict(self.counts)
        for d, c in other.counts.items():
            counts[d] = counts.get(d, 0) + c
        return DistributionReport(
            counts=counts,
            inputs=self.inputs + other.inputs,
            below_threshold=self.below_threshold + other.below_threshold,
            errored=self.errored + other.errored,
            policy=self.policy or other.policy,
            training_meta=self.training_meta or other.training_meta,
        )

    def to_json(self) -> dict:
        obj = {
            "total": self.total,
            "directions": self.directions,
            "en_centric_share": self.en_centric_share,
            "zhs_centric_share": self.zhs_centric_share,
            "overlap": self.overlap,
            "zhs_non_english": self.zhs_non_english,
            "inputs": self.inputs,
            "below_threshold": self.below_threshold,
            "errored": self.errored,
            "counts": dict(sorted(self.counts.items())),
        }
        if self.policy is not None:
            obj["policy"] = self.policy
        if self.training_meta is not None:
            obj["training_meta"] = self.training_meta
        return obj

    def render_text(self, columns: int = 3) -> str:
        """Direction/count pairs laid out in `columns` side-by-side blocks."""
        items = sorted(self.counts.items(), key=lambda kv: (kv[0].split("->")[0] != ENGLISH, kv[0]))
        cells = [f"{d:<9} {c:>7,}" for d, c in items]
        rows = -(-len(cells) // columns) if cells else 0
        lines = []
        for r in range(rows):
            lines.append("   ".join(cells[r + k * rows] for k in range(columns) if r + k * rows < len(cells)))
        lines.append(
            f"total {self.total:,} over {self.directions} directions; "
            f"en-centric {self.en_centric_share:.1%}, zhs-centric {self.zhs_centric_share:.1%}"
        )
        return "\n".join(lines) + "\n"


def distribution_from_counts(counts: Mapping[str, int]) -> DistributionReport:
    report = DistributionReport()
    for key, count in counts.items():
        try:
            d = Direction.parse(key)
        except ValueError as e:
            raise DataError(str(e)) from e
        if count < 0:
            raise DataError(f"{key}: negative count {count}")
        report.counts[str(d)] = report.counts.get(str(d), 0) + int(count)
    report.inputs = report.total
    return report


def load_published_sft_counts() -> Dict[str, int]:
    _, rows = load_published_csv("sft_directions.csv")
    return {row["direction"]: int(row["count"]) for row in rows}


def sft_meta() -> Dict[str, str]:
    return dict(load_bundled_json("training_setups.json")["sft"])


def build_sft(
    sets: Iterable[CandidateSet],
    policy: SelectionPolicy,
    names: Optional[Mapping[str, str]] = None,
    on_error: Optional[Callable[[int, Exception], None]] = None,
) -> Tuple[Iterator[SftRecord], DistributionReport]:
    """
    Returns the record stream and a DistributionReport completed once the
    stream is consumed. inputs = records + below_threshold + errored.
    """
    names = display_names() if names is None else names
    report = DistributionReport(policy=policy.to_dict())

    def stream() -> Iterator[SftRecord]:
        for i, cs in enumerate(sets):
            report.inputs += 1
            try:
                index, score = select_best(cs, policy)
                chosen = cs.candidates[index]
                if not chosen.text.strip():
                    raise SelectionError(f"set {i}: best candidate is empty")
                prompt = format_instruction(cs.direction, cs.src_text, None, names)
            except DataError as e:
                report.errored += 1
                logger.debug("candidate set %d errored: %s", i, e)
                if on_error is not None:
                    on_error(i, e)
                continue
            if not threshold_filter((chosen, score), policy.threshold):
                report.below_threshold += 1
                continue
            report.add(cs.direction)
            yield SftRecord(cs.direction, prompt, chosen.text, score, chosen.generator)
        logger.info(
            "sft: %d sets, %d kept, %d below threshold, %d errored",
            report.inputs, report.total, report.below_threshold, report.errored,
        )

    return stream(), report


def sample_sft(records: Sequence, sizes: Sequence[int], seed: int) -> Dict[int, List]:
    """
    Nested seeded samples: one shuffle, each size takes a prefix, so smaller
    samples are subsets of larger ones.
    """
    for size in sizes:
        if size < 0 or size > len(records):
            raise SampleSizeError(f"cannot sample {size} of {len(records)} records")
    order = shuffled_indices(len(records), seed, "sample_sft")
    return {size: [records[i] for i in order[:size]] for size in sizes}


def count_zhs_non_english(records: Iterable[SftRecord]) -> int:
    return sum(
        1 for r in records if r.direction.involves(CHINESE) and not r.direction.involves(ENGLISH)
    )
