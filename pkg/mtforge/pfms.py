# mtforge/pfms.py
"""
Parallel-First Monolingual-Second (PFMS) mix planning.

For every language the planner fills a budget of n tokens from the parallel
pools first (Chinese-centric capped at n/2, English-centric fills the rest,
Chinese-centric tops up any English shortfall), supplements what parallel data
cannot cover with monolingual text, and always adds 0.1n monolingual tokens
on top. English and Simplified Chinese have a single parallel pool each.

Materialization turns a plan into a sampling manifest of (file, index)
references by walking each pool in a seeded shuffle order.
"""

import logging
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from mtforge.corpus_model import (
    CHINESE,
    ENGLISH,
    LanguageTag,
    display_names,
    get_language,
    load_registry,
    parse_monolingual_stream,
    parse_parallel_stream,
)
from mtforge.errors import ConfigError, DataError, MissingLanguageError, TableFormatError
from mtforge.tokenization import VocabTokenizer, tokenize
from mtforge.utils.config_loader import load_bundled_json, load_published_csv
from mtforge.utils.rng import shuffled_indices

logger = logging.getLogger(__name__)

BILLION = 10 ** 9
MONO, EN_PAR, ZH_PAR = "mono", "en_centric", "zh_centric"
POOLS = (MONO, EN_PAR, ZH_PAR)
PUBLISHED_BUDGETS = ("0.1", "0.5", "1", "2", "3")

# relative drift tolerated between budgets before a pool counts as growing
JITTER = 0.005


def budget_tokens(billions) -> int:
    """Convert a budget in billions of tokens to whole tokens (1e9 exactly)."""
    try:
        value = Decimal(str(billions))
    except InvalidOperation as e:
        raise ConfigError(f"budget is not a number: {billions!r}") from e
    if not value.is_finite() or int(value * BILLION) <= 0:
        raise ConfigError(f"budget must be positive, got {billions!r}")
    return int(value * BILLION)


def format_billions(tokens: int) -> str:
    text = format(Decimal(tokens) / BILLION, "f")
    return text.rstrip("0").rstrip(".") if "." in text else text


@dataclass(frozen=True)
class Availability:
    lang: LanguageTag
    mono_tokens: int
    en_par_tokens: Optional[int]
    zh_par_tokens: Optional[int]
    unbounded: FrozenSet[str] = frozenset()

    def __post_init__(self):
        if self.lang.code == ENGLISH and self.en_par_tokens is not None:
            raise ValueError("English has no English-centric pool")
        if self.lang.code == CHINESE and self.zh_par_tokens is not None:
            raise ValueError("Simplified Chinese has no Chinese-centric pool")
        for pool, value in self.pools().items():
            if value is not None and value < 0:
                raise ValueError(f"{self.lang.code} {pool}: negative availability {value}")

    def pools(self) -> Dict[str, Optional[int]]:
        return {MONO: self.mono_tokens, EN_PAR: self.en_par_tokens, ZH_PAR: self.zh_par_tokens}


@dataclass(frozen=True)
class Allocation:
    lang: LanguageTag
    budget_n: int
    mono_alloc: int
    en_par_alloc: Optional[int]
    zh_par_alloc: Optional[int]

    @property
    def parallel(self) -> int:
        return (self.en_par_alloc or 0) + (self.zh_par_alloc or 0)

    @property
    def total(self) -> int:
        return self.mono_alloc + self.parallel

    def pools(self) -> Dict[str, Optional[int]]:
        return {MONO: self.mono_alloc, EN_PAR: self.en_par_alloc, ZH_PAR: self.zh_par_alloc}


def plan_language(n: int, a: Availability) -> Allocation:
    if n < 0:
        raise ConfigError(f"budget must be nonnegative, got {n}")
    n = int(n)

    if a.en_par_tokens is None or a.zh_par_tokens is None:
        pool = a.zh_par_tokens if a.en_par_tokens is None else a.en_par_tokens
        par = min(pool or 0, n)
        en_alloc = None if a.en_par_tokens is None else par
        zh_alloc = None if a.zh_par_tokens is None else par
        shortfall = n - par
    else:
        zh_first = min(a.zh_par_tokens, n // 2)
        en_alloc = min(a.en_par_tokens, n - zh_first)
        zh_alloc = min(a.zh_par_tokens, n - en_alloc)
        shortfall = n - en_alloc - zh_alloc

    mono = min(a.mono_tokens, n // 10 + shortfall)
    return Allocation(a.lang, n, mono, en_alloc, zh_alloc)


@dataclass
class MixPlan:
    budget_n: int
    allocations: Dict[str, Allocation]
    training_meta: Optional[Dict[str, str]] = None

    def totals(self) -> Dict[str, int]:
        sums = {pool: 0 for pool in POOLS}
        for alloc in self.allocations.values():
            for pool, value in alloc.pools().items():
                sums[pool] += value or 0
        sums["all"] = sum(sums[p] for p in POOLS)
        return sums

    def to_json(self) -> dict:
        obj = {
            "budget_billions": format_billions(self.budget_n),
            "budget_tokens": self.budget_n,
            "rows": [
                {"lang": code, **alloc.pools()} for code, alloc in self.allocations.items()
            ],
            "totals": self.totals(),
        }
        if self.training_meta is not None:
            obj["training_meta"] = dict(self.training_meta)
        return obj

    def render_text(self) -> str:
        names = display_names()
        header = ("Language", "Mono", "EN-centric", "ZH-centric")
        body = [
            (names[code],) + tuple("-" if v is None else f"{v:,}" for v in alloc.pools().values())
            for code, alloc in self.allocations.items()
        ]
        widths = [max(len(r[i]) for r in [header] + body) for i in range(4)]
        lines = [f"n = {format_billions(self.budget_n)}B tokens"]
        for r in [header] + body:
            lines.append(
                "  ".join([r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])])
            )
        return "\n".join(lines) + "\n"


def pretrain_meta() -> Dict[str, str]:
    return dict(load_bundled_json("training_setups.json")["pretrain"])


def plan_mix(
    n: int,
    avail: Mapping[str, Availability],
    training_meta: Optional[Dict[str, str]] = None,
) -> MixPlan:
    """Plan every registry language; `avail` is keyed by language code."""
    registry = load_registry()
    missing = [t.code for t in registry if t.code not in avail]
    if missing:
        raise MissingLanguageError(missing)
    allocations = {t.code: plan_language(n, avail[t.code]) for t in registry}
    plan = MixPlan(n, allocations, training_meta)
    logger.info("planned n=%s: %s tokens in total", format_billions(n), f"{plan.totals()['all']:,}")
    return plan


# -- published tables -------------------------------------------------------

@dataclass
class PublishedTable:
    budget_billions: str
    budget_n: int
    rows: Dict[str, Dict[str, Optional[int]]]


def _cell(value: str, where: str) -> Optional[int]:
    value = value.strip().replace(",", "")
    if value == "-":
        return None
    try:
        return int(value)
    except ValueError as e:
        raise TableFormatError(f"{where}: not a token count: {value!r}") from e


def parse_allocation_tables(rows: Iterable[Mapping[str, str]]) -> List[PublishedTable]:
    """Rows of {budget_billions, lang, mono, en_centric, zh_centric} -> tables by budget."""
    tables: Dict[str, PublishedTable] = {}
    for i, row in enumerate(rows, start=1):
        try:
            budget = str(row["budget_billions"]).strip()
            code = get_language(row["lang"]).code
            cells = {pool: _cell(row[pool], f"row {i}") for pool in POOLS}
        except KeyError as e:
            raise TableFormatError(f"row {i}: missing column {e}") from e
        table = tables.setdefault(budget, PublishedTable(budget, budget_tokens(budget), {}))
        table.rows[code] = cells
    return sorted(tables.values(), key=lambda t: t.budget_n)


def load_published_tables() -> List[PublishedTable]:
    _, rows = load_published_csv("cpt_tables.csv")
    return parse_allocation_tables(rows)


def _observations(tables: Sequence[PublishedTable], code: str, pool: str) -> List[Tuple[str, int]]:
    return [
        (t.budget_billions, t.rows[code][pool])
        for t in tables
        if code in t.rows and t.rows[code][pool] is not None
    ]


def check_consistency(tables: Sequence[PublishedTable]) -> List[str]:
    """List pools whose allocation shrinks with a larger budget beyond jitter."""
    tables = sorted(tables, key=lambda t: t.budget_n)
    issues = []
    codes = sorted({c for t in tables for c in t.rows})
    for code in codes:
        for pool in POOLS:
            obs = _observations(tables, code, pool)
            for (b0, v0), (b1, v1) in zip(obs, obs[1:]):
                if v1 < v0 * (1 - JITTER):
                    issues.append(f"{code} {pool}: {v0:,} at n={b0} but {v1:,} at n={b1}")
    return issues


def infer_availability(tables: Sequence[PublishedTable]) -> Dict[str, Availability]:
    """
    Availability per language and pool as the largest allocation observed.

    A pool still growing between the two largest budgets never saturated, so
    its availability is only a lower bound; it is listed in `unbounded`.
    """
    tables = sorted(tables, key=lambda t: t.budget_n)
    if len(tables) < len(PUBLISHED_BUDGETS):
        logger.warning("inferring availability from %d tables only", len(tables))
    for issue in check_consistency(tables):
        logger.warning("inconsistent tables: %s", issue)

    codes = [t.code for t in load_registry() if any(t.code in table.rows for table in tables)]
    result = {}
    for code in codes:
        values: Dict[str, Optional[int]] = {}
        unbounded = set()
        for pool in POOLS:
            obs = _observations(tables, code, pool)
            if not obs:
                values[pool] = None
                continue
            values[pool] = max(v for _, v in obs)
            if len(obs) < 2 or obs[-1][1] > obs[-2][1] * (1 + JITTER):
                unbounded.add(pool)
        result[code] = Availability(
            lang=get_language(code),
            mono_tokens=values[MONO] or 0,
            en_par_tokens=values[EN_PAR],
            zh_par_tokens=values[ZH_PAR],
            unbounded=frozenset(unbounded),
        )
    return result


def load_availability(data: Mapping[str, Mapping[str, int]]) -> Dict[str, Availability]:
    """Build availabilities from {code: {mono, en_centric, zh_centric}}."""
    result = {}
    for code, pools in data.items():
        lang = get_language(code)
        try:
            result[lang.code] = Availability(
                lang=lang,
                mono_tokens=int(pools.get(MONO, 0)),
                en_par_tokens=None if lang.code == ENGLISH else int(pools.get(EN_PAR, 0)),
                zh_par_tokens=None if lang.code == CHINESE else int(pools.get(ZH_PAR, 0)),
            )
        except (TypeError, ValueError) as e:
            raise DataError(f"availability for {code}: {e}") from e
    return result


# Cells the published tables overshoot by more than the small-cell bound:
# monolingual floors at n = 0.1. Reports list them by name.
KNOWN_EXCEPTIONS = frozenset(
    ("0.1", code, MONO) for code in ("az", "el", "he", "hu", "my", "ro", "sk", "sv", "tr", "vi", "zht")
)


@dataclass(frozen=True)
class CellDeviation:
    lang: str
    pool: str
    published: int
    planned: int
    known_exception: bool = False

    @property
    def diff(self) -> int:
        return self.planned - self.published

    @property
    def relative(self) -> float:
        if self.published == 0:
            return 0.0 if self.planned == 0 else float("inf")
        return abs(self.diff) / self.published

    def within(self, rel_tol: float = JITTER, small_cell: int = 20_000_000, small_abs: int = 1_000) -> bool:
        """Relative tolerance everywhere; cells below `small_cell` also need |diff| <= small_abs."""
        if self.relative > rel_tol:
            return False
        return self.published >= small_cell or abs(self.diff) <= small_abs

    @property
    def accepted(self) -> bool:
        return self.within() or self.known_exception


def compare_to_published(plan: MixPlan, table: PublishedTable) -> List[CellDeviation]:
    if plan.budget_n != table.budget_n:
        raise DataError(
            f"plan budget {format_billions(plan.budget_n)} does not match table n={table.budget_billions}"
        )
    out = []
    for code, cells in table.rows.items():
        alloc = plan.allocations.get(code)
        if alloc is None:
            continue
        planned = alloc.pools()
        for pool, published in cells.items():
            if published is None:
                continue
            known = (table.budget_billions, code, pool) in KNOWN_EXCEPTIONS
            out.append(CellDeviation(code, pool, published, planned[pool] or 0, known))
    return out


# -- materialization --------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    lang: str
    pool: str
    file: str
    index: int
    tokens: int

    def to_json(self) -> dict:
        return {"lang": self.lang, "pool": self.pool, "file": self.file, "index": self.index, "tokens": self.tokens}


@dataclass(frozen=True)
class PoolSummary:
    lang: str
    pool: str
    allocation: int
    achieved: int
    records: int
    exhausted: bool

    @property
    def overshoot(self) -> int:
        return max(0, self.achieved - self.allocation)

    def to_json(self) -> dict:
        return {
            "lang": self.lang,
            "pool": self.pool,
            "allocation": self.allocation,
            "achieved": self.achieved,
            "overshoot": self.overshoot,
            "records": self.records,
            "exhausted": self.exhausted,
        }


@dataclass
class SamplingManifest:
    seed: int
    entries: List[ManifestEntry] = field(default_factory=list)
    summaries: List[PoolSummary] = field(default_factory=list)


CorpusLocator = Mapping[Tuple[str, str], Sequence[str]]


def load_corpora(data: Mapping[str, Mapping[str, Sequence[str]]], base: Optional[Path] = None) -> Dict[Tuple[str, str], List[str]]:
    """{code: {pool: [files]}} -> {(code, pool): [files]}; relative paths resolve against `base`."""
    out = {}
    for code, pools in data.items():
        lang = get_language(code).code
        for pool, files in pools.items():
            if pool not in POOLS:
                raise DataError(f"{code}: unknown pool {pool!r}")
            out[(lang, pool)] = [str(base / f) if base is not None else str(f) for f in files]
    return out


def _record_tokens(files: Sequence[str], pool: str, tokenizer: Optional[VocabTokenizer]) -> List[Tuple[str, int, int]]:
    """(file, index among valid records, tokens) for every record of a pool."""
    records = []
    for path in files:
        if pool == MONO:
            stale = 0
            for i, rec in enumerate(parse_monolingual_stream(path)):
                if tokenizer is None:
                    if rec.token_count is None:
                        raise DataError(f"{path}: record {i} has no token_count and no tokenizer was given")
                    count = rec.token_count
                elif rec.token_count is not None and rec.tokenizer == tokenizer.name:
                    count = rec.token_count
                else:
                    count = len(tokenize(tokenizer, rec.text))
                    if rec.token_count is not None and rec.token_count != count:
                        stale += 1
                records.append((path, i, count))
            if stale:
                logger.warning("%s: %d stored token counts differ from %s; recounted", path, stale, tokenizer.name)
        else:
            if tokenizer is None:
                raise DataError(f"{path}: parallel pools need a tokenizer to count tokens")
            for i, pair in enumerate(parse_parallel_stream(path)):
                count = len(tokenize(tokenizer, pair.src_text)) + len(tokenize(tokenizer, pair.tgt_text))
                records.append((path, i, count))
    return records


def materialize(
    plan: MixPlan,
    corpora: CorpusLocator,
    tokenizer: Optional[VocabTokenizer],
    seed: int,
) -> SamplingManifest:
    """
    Select records per (language, pool) in a seeded shuffle order until the
    running token count first reaches the allocation. Text is never copied;
    entries reference (file, index).
    """
    manifest = SamplingManifest(seed)
    for code, alloc in plan.allocations.items():
        for pool, target in alloc.pools().items():
            if target is None:
                continue
            files = corpora.get((code, pool), [])
            if target == 0:
                manifest.summaries.append(PoolSummary(code, pool, 0, 0, 0, False))
                continue
            records = _record_tokens(files, pool, tokenizer)
            achieved = 0
            taken = 0
            for idx in shuffled_indices(len(records), seed, code, pool):
                if achieved >= target:
                    break
                path, index, tokens = records[idx]
                manifest.entries.append(ManifestEntry(code, pool, path, index, tokens))
                achieved += tokens
                taken += 1
            exhausted = achieved < target
            if exhausted:
                logger.warning(
                    "%s %s exhausted: %s of %s tokens", code, pool, f"{achieved:,}", f"{target:,}"
                )
            manifest.summaries.append(PoolSummary(code, pool, target, achieved, taken, exhausted))
    return manifest


def plan_from_json(obj: Mapping) -> MixPlan:
    """Inverse of MixPlan.to_json."""
    try:
        n = int(obj["budget_tokens"])
        allocations = {}
        for row in obj["rows"]:
            lang = get_language(row["lang"])
            allocations[lang.code] = Allocation(
                lang, n, int(row[MONO]),
                None if row.get(EN_PAR) is None else int(row[EN_PAR]),
                None if row.get(ZH_PAR) is None else int(row[ZH_PAR]),
            )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"not a mix plan: {e}") from e
    return MixPlan(n, allocations, obj.get("training_meta"))
