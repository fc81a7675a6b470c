import functools
import json
import shlex
from contextlib import ExitStack
from pathlib import Path

import click
from rich.console import Console

from mtforge.cleaning import (
    CleanConfig,
    PrecomputedEmbedder,
    SubprocessEmbedder,
    load_profiles,
    run_pipeline,
    save_profiles,
    train_langid,
)
from mtforge.config import RunConfig, get_config_path
from mtforge.corpus_model import (
    REGISTRY_SIZE,
    Direction,
    StreamFormat,
    display_names,
    load_registry,
    pair_to_json,
    parse_parallel_stream,
)
from mtforge.display import MtForgeDisplay
from mtforge.errors import AlignmentError, ConfigError, DataError, MtForgeError, SelectionError
from mtforge.evalkit import (
    aggregate,
    build_icl_prompt,
    corpus_bleu,
    default_groups,
    ingest_scores,
    load_groups,
    load_published_scores,
    select_exemplars,
    spbleu,
    wmt_ingest,
)
from mtforge.pfms import (
    budget_tokens,
    check_consistency,
    compare_to_published,
    format_billions,
    infer_availability,
    load_availability,
    load_corpora,
    load_published_tables,
    materialize,
    plan_from_json,
    plan_mix,
    pretrain_meta,
)
from mtforge.sft import (
    SelectionPolicy,
    SftRecord,
    build_sft,
    count_zhs_non_english,
    distribution_from_counts,
    format_instruction,
    load_published_sft_counts,
    parse_candidate_set,
    sample_sft,
    sft_meta,
)
from mtforge.tokenization import corpus_efficiency, efficiency_table, load_vocab, published_efficiency
from mtforge.utils.jsonl import iter_lines, read_json, write_json, write_jsonl
from mtforge.utils.log import setup_logging

VERSION = "0.1.0"
console = Console()
display = MtForgeDisplay(console)

INPUT_FILE = click.Path(exists=True, dir_okay=False)
OUTPUT_DIR = click.Path(file_okay=False)


def reports_errors(f):
    """Print mtforge errors in the error style and exit with their code."""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except MtForgeError as e:
            display.status_update(str(e), "error")
            click.get_current_context().exit(e.exit_code)

    return wrapper


def _run_config(ctx) -> RunConfig:
    return ctx.obj["config"]


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_lines(path):
    return [line for _, line in iter_lines(path)]


def _read_json_input(path, what: str):
    try:
        return read_json(path)
    except (OSError, ValueError) as e:
        raise DataError(f"cannot read {what} {path}: {e}") from e


def _code_paths(values, option: str):
    """Parse repeated CODE=PATH options into {code: path}."""
    out = {}
    for value in values:
        code, sep, path = value.partition("=")
        if not sep or not code or not path:
            raise click.BadParameter(f"expected CODE=PATH, got {value!r}", param_hint=option)
        if not Path(path).is_file():
            raise click.BadParameter(f"{path} is not a file", param_hint=option)
        out[code] = path
    return out


def _direction(value):
    try:
        return Direction.parse(value)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--direction") from None


def _finish(written, cfg: RunConfig, out: Path, command: str, inputs=None):
    written.append(cfg.snapshot(out, command, inputs))
    for path in written:
        display.wrote(path)


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Config file used instead of ~/.mtforge/config.json.")
@click.option("--seed", type=click.IntRange(min=0), help="Global seed for every random choice.")
@click.option("--workers", type=click.IntRange(min=1), help="Worker processes for parallel stages.")
@click.pass_context
@reports_errors
def cli(ctx, config_path, seed, workers):
    """mtforge: multilingual MT data preparation and evaluation.

    Every command writes its machine outputs and a config.snapshot.json into
    the directory given by --out. Set MTFORGE_LOG=INFO (or DEBUG) for logs.
    """
    setup_logging()
    ctx.ensure_object(dict)
    ctx.obj["config"] = RunConfig.resolve(config_path, seed=seed, workers=workers)


@cli.command()
def version():
    """Print the current mtforge version."""
    click.echo(f"mtforge v{VERSION}")


@cli.command()
@reports_errors
def languages():
    """List the 46 supported languages."""
    display.languages(load_registry())


@cli.command()
@click.pass_context
@reports_errors
def check(ctx):
    """Check configuration and bundled tables."""
    console.print("[bold blue]mtforge Configuration Check[/bold blue]\n")

    user_file = get_config_path()
    if user_file.exists():
        display.status_update(f"user config: {user_file}", "success")
    else:
        display.status_update(f"no user config at {user_file}; bundled defaults in use", "info")
    cfg = _run_config(ctx)
    display.status_update(f"seed {cfg.seed}, {cfg.workers} worker(s)", "info")

    registry = load_registry()
    if len(registry) == REGISTRY_SIZE:
        display.status_update(f"language registry: {len(registry)} languages", "success")
    else:
        display.status_update(f"language registry holds {len(registry)} languages, expected {REGISTRY_SIZE}", "warning")

    tables = load_published_tables()
    display.status_update(
        f"allocation tables: n = {', '.join(t.budget_billions for t in tables)} (billions)", "success"
    )
    issues = check_consistency(tables)
    if issues:
        display.status_update(f"{len(issues)} pool(s) shrink with a larger budget", "warning")
        display.issues("Inconsistent allocation tables", issues)

    counts = load_published_sft_counts()
    display.status_update(f"SFT direction counts: {len(counts)} directions", "success")
    published = published_efficiency()
    display.status_update(f"tokenization table: {', '.join(published)}", "success")
    scores = load_published_scores("flores_gemma_en.csv").merge(load_published_scores("flores_gemma_zh.csv"))
    display.status_update(f"FLORES+ transcriptions: {len(scores)} scores for {len(scores.systems())} systems", "success")


# -- tokenization -----------------------------------------------------------

@cli.command()
@click.option("--vocab", "vocabs", multiple=True, type=INPUT_FILE, help="Vocab asset; repeat for several tokenizers.")
@click.option("--english", required=True, type=INPUT_FILE, help="English side, one sentence per line.")
@click.option("--lang", "langs", multiple=True, required=True, metavar="CODE=PATH", help="Aligned translations of --english.")
@click.option("--out", required=True, type=OUTPUT_DIR)
@click.pass_context
@reports_errors
def tokstats(ctx, vocabs, english, langs, out):
    """Tokenizer efficiency: length ratio of each language against English."""
    cfg = _run_config(ctx)
    block = cfg.block("tokstats")
    if vocabs:
        block["vocabs"] = list(vocabs)
    if not block.get("vocabs"):
        raise ConfigError("no vocab given (use --vocab or tokstats.vocabs)")
    aligned = {code: _read_lines(path) for code, path in _code_paths(langs, "--lang").items()}
    english_lines = _read_lines(english)

    reports = []
    for path in block["vocabs"]:
        tok = load_vocab(path)
        display.status_update(f"tokenizing with {tok.name}")
        reports.append(corpus_efficiency(tok, aligned, english_lines, workers=cfg.workers))
    table = efficiency_table(reports)
    display.efficiency(table)

    out = _out_dir(out)
    write_json(out / "tokstats.json", {"reports": [r.to_json() for r in reports], "table": table.to_json()})
    (out / "tokstats.txt").write_text(table.render_text(), encoding="utf-8")
    _finish(
        [out / "tokstats.json", out / "tokstats.txt"], cfg, out, "tokstats",
        {"english": english, "lang": sorted(langs)},
    )


# -- cleaning ---------------------------------------------------------------

@cli.command()
@click.option("--in", "in_path", required=True, type=INPUT_FILE, help="Parallel corpus (JSONL or TSV).")
@click.option("--out", required=True, type=OUTPUT_DIR)
@click.option("--format", "fmt", type=click.Choice([f.value for f in StreamFormat]))
@click.option("--profiles", type=INPUT_FILE, help="Language-ID profiles from train-langid.")
@click.option("--embeddings", type=INPUT_FILE, help="Precomputed vectors keyed by sha256 of the text.")
@click.option("--embed-cmd", help="Command speaking the JSONL embedding protocol.")
@click.option("--max-chars", type=int)
@click.option("--max-len-ratio", type=float)
@click.option("--min-chars", type=int)
@click.option("--max-digit-punct-ratio", type=float)
@click.option("--langid-min-margin", type=float)
@click.option("--sim-threshold", type=float)
@click.option("--dedup/--no-dedup", default=None)
@click.pass_context
@reports_errors
def clean(ctx, in_path, out, fmt, profiles, embeddings, embed_cmd, **thresholds):
    """Filter a parallel corpus: heuristics, language ID, then similarity."""
    if embeddings and embed_cmd:
        raise click.UsageError("use either --embeddings or --embed-cmd, not both")
    cfg = _run_config(ctx)
    block = cfg.override("clean", format=fmt, **thresholds)
    clean_cfg = CleanConfig.from_dict(block)
    try:
        stream_format = StreamFormat(block.get("format", "jsonl"))
    except ValueError as e:
        raise ConfigError(f"clean.format: {e}") from e
    langid_profiles = load_profiles(profiles) if profiles else None
    out = _out_dir(out)

    parse_errors = []
    quarantined = []
    errored = []
    with ExitStack() as stack:
        embed = None
        if embeddings:
            embed = PrecomputedEmbedder(embeddings)
        elif embed_cmd:
            embed = stack.enter_context(SubprocessEmbedder(shlex.split(embed_cmd)))
        pairs = parse_parallel_stream(in_path, stream_format, on_error=parse_errors.append)
        kept, stats = run_pipeline(
            pairs,
            clean_cfg,
            profiles=langid_profiles,
            embed=embed,
            quarantine=lambda p, d: quarantined.append({**pair_to_json(p), "reason": d.reason.value, "detail": d.detail}),
            on_error=lambda p, e: errored.append({**pair_to_json(p), "error": str(e)}),
        )
        write_jsonl(out / "clean.jsonl", (pair_to_json(p) for p in kept))

    written = [out / "clean.jsonl"]
    write_json(
        out / "stats.json",
        {
            "counts": stats.to_dict(),
            "total": stats.total,
            "kept": stats.kept,
            "dropped": stats.dropped,
            "errored": stats.errored,
            "parse_errors": len(parse_errors),
        },
    )
    written.append(out / "stats.json")
    for name, rows in (
        ("quarantine.jsonl", quarantined),
        ("errored.jsonl", errored),
        ("parse_errors.jsonl", [e.to_json() for e in parse_errors]),
    ):
        if rows:
            write_jsonl(out / name, rows)
            written.append(out / name)

    display.clean_stats(stats.to_dict(), len(parse_errors))
    _finish(written, cfg, out, "clean", {"in": in_path, "profiles": profiles, "embeddings": embeddings, "embed_cmd": embed_cmd})


@cli.command("train-langid")
@click.option("--lang", "langs", multiple=True, required=True, metavar="CODE=PATH", help="Training text, one sample per line.")
@click.option("--k", type=int, help="Profile size (ranked n-grams kept per language).")
@click.option("--out", required=True, type=OUTPUT_DIR)
@click.pass_context
@reports_errors
def train_langid_cmd(ctx, langs, k, out):
    """Train character n-gram language-ID profiles."""
    cfg = _run_config(ctx)
    block = cfg.override("clean", langid_k=k)
    samples = {code: _read_lines(path) for code, path in _code_paths(langs, "--lang").items()}
    profiles = train_langid(samples, k=int(block.get("langid_k", 300)))
    out = _out_dir(out)
    save_profiles(out / "profiles.json", profiles)
    display.status_update(f"trained {len(profiles)} profiles", "success")
    _finish([out / "profiles.json"], cfg, out, "train-langid", {"lang": sorted(langs)})


# -- pretraining mix --------------------------------------------------------

def _availability(path):
    if path is None:
        return infer_availability(load_published_tables())
    data = _read_json_input(path, "availability")
    if not isinstance(data, dict):
        raise DataError(f"availability {path} must map language codes to pools")
    return load_availability(data)


def _deviation_json(d) -> dict:
    return {"lang": d.lang, "pool": d.pool, "published": d.published, "planned": d.planned, "diff": d.diff}


def _deviation_text(d) -> str:
    return f"{d.lang} {d.pool}: published {d.published:,}, planned {d.planned:,}"


@cli.command("plan-mix")
@click.option("--n", "n", help="Per-language budget in billions of tokens (e.g. 0.1, 0.5, 1, 2, 3).")
@click.option("--availability", type=INPUT_FILE, help="JSON {code: {mono, en_centric, zh_centric}}; inferred from the published tables when omitted.")
@click.option("--with-meta/--no-meta", default=None, help="Echo the pretraining setup into the plan.")
@click.option("--compare/--no-compare", default=False, help="Compare against the published table for this budget.")
@click.option("--out", required=True, type=OUTPUT_DIR)
@click.pass_context
@reports_errors
def plan_mix_cmd(ctx, n, availability, with_meta, compare, out):
    """Plan a PFMS pretraining mix for every language."""
    cfg = _run_config(ctx)
    block = cfg.override("pfms", n=n, include_training_meta=with_meta)
    budget = budget_tokens(block.get("n"))
    meta = pretrain_meta() if block.get("include_training_meta") else None
    plan = plan_mix(budget, _availability(availability), training_meta=meta)

    deviations = []
    if compare:
        matching = [t for t in load_published_tables() if t.budget_n == budget]
        if matching:
            deviations = compare_to_published(plan, matching[0])
        else:
            display.status_update(f"no published table for n = {format_billions(budget)}", "warning")
    display.mix_plan(plan, deviations)

    out = _out_dir(out)
    write_json(out / "plan.json", plan.to_json())
    (out / "plan.txt").write_text(plan.render_text(), encoding="utf-8")
    written = [out / "plan.json", out / "plan.txt"]
    if deviations:
        outside = [d for d in deviations if not d.accepted]
        known = [d for d in deviations if not d.within() and d.known_exception]
        write_json(
            out / "deviations.json",
            {"outside": [_deviation_json(d) for d in outside], "known_exceptions": [_deviation_json(d) for d in known]},
        )
        written.append(out / "deviations.json")
        within = len(deviations) - len(outside) - len(known)
        if known:
            display.issues("Known exceptions", [_deviation_text(d) for d in known])
        status = "success" if not outside else "warning"
        display.status_update(f"{within} of {len(deviations)} cells within tolerance, {len(known)} known exception(s)", status)
    _finish(written, cfg, out, "plan-mix", {"availability": availability})


@cli.command("materialize")
@click.option("--plan", "plan_path", required=True, type=INPUT_FILE, help="plan.json from plan-mix.")
@click.option("--corpora", required=True, type=INPUT_FILE, help="JSON {code: {pool: [files]}}, paths relative to this file.")
@click.option("--vocab", type=INPUT_FILE, help="Tokenizer used to count tokens.")
@click.option("--out", required=True, type=OUTPUT_DIR)
@click.pass_context
@reports_errors
def materialize_cmd(ctx, plan_path, corpora, vocab, out):
    """Turn a mix plan into a seeded sampling manifest."""
    cfg = _run_config(ctx)
    plan = plan_from_json(_read_json_input(plan_path, "plan"))
    locator = load_corpora(_read_json_input(corpora, "corpora"), Path(corpora).parent)
    tok = load_vocab(vocab) if vocab else None
    manifest = materialize(plan, locator, tok, cfg.seed)

    out = _out_dir(out)
    write_jsonl(out / "manifest.jsonl", (e.to_json() for e in manifest.entries))
    exhausted = [s for s in manifest.summaries if s.exhausted]
    write_json(
        out / "manifest_summary.json",
        {"seed": manifest.seed, "pools": [s.to_json() for s in manifest.summaries], "exhausted": len(exhausted)},
    )
    display.status_update(f"{len(manifest.entries):,} records selected", "success")
    if exhausted:
        display.issues(
            "Exhausted pools",
            [f"{s.lang} {s.pool}: {s.achieved:,} of {s.allocation:,}" for s in exhausted],
        )
    _finish(
        [out / "manifest.jsonl", out / "manifest_summary.json"], cfg, out, "materialize",
        {"plan": plan_path, "corpora": corpora, "vocab": vocab},
    )


# -- supervised fine-tuning -------------------------------------------------

def _candidate_sets(path, errors):
    for lineno, line in iter_lines(path):
        if not line.strip():
            continue
        try:
            yield parse_candidate_set(json.loads(line))
        except (json.JSONDecodeError, DataError) as e:
            errors.append({"stage": "parse", "line": lineno, "error": str(e)})


@cli.command("build-sft")
@click.option("--in", "in_path", required=True, type=INPUT_FILE, help="Candidate sets, one JSON object per line.")
@click.option("--out", required=True, type=OUTPUT_DIR)
@click.option("--metric", help='Selection metric, e.g. "xcomet" or "mean(xcomet,cometkiwi)".')
@click.option("--threshold", type=float)
@click.option("--with-meta/--no-meta", default=None, help="Echo the SFT setup into the report.")
@click.pass_context
@reports_errors
def build_sft_cmd(ctx, in_path, out, metric, threshold, with_meta):
    """Select the best QE-scored candidate per segment and write SFT records."""
    cfg = _run_config(ctx)
    block = cfg.override("sft", metric=metric, threshold=threshold, include_training_meta=with_meta)
    policy = SelectionPolicy(metric=block["metric"], threshold=float(block["threshold"]))

    errors = []
    records, report = build_sft(
        _candidate_sets(in_path, errors),
        policy,
        on_error=lambda i, e: errors.append({"stage": "select", "set": i, "error": str(e)}),
    )
    out = _out_dir(out)
    write_jsonl(out / "sft.jsonl", (r.to_json() for r in records))
    if block.get("include_training_meta"):
        report.training_meta = sft_meta()
    write_json(out / "distribution.json", report.to_json())
    (out / "distribution.txt").write_text(report.render_text(), encoding="utf-8")
    written = [out / "sft.jsonl", out / "distribution.json", out / "distribution.txt"]
    if errors:
        write_jsonl(out / "errors.jsonl", errors)
        written.append(out / "errors.jsonl")
    display.sft_distribution(report)
    _finish(written, cfg, out, "build-sft", {"in": in_path})


@cli.command("sample-sft")
@click.option("--in", "in_path", required=True, type=INPUT_FILE, help="sft.jsonl from build-sft.")
@click.option("--sizes", help="Comma-separated sample sizes, e.g. 1000,5000.")
@click.option("--out", required=True, type=OUTPUT_DIR)
@click.pass_context
@reports_errors
def sample_sft_cmd(ctx, in_path, sizes, out):
    """Draw nested seeded samples of an SFT set."""
    cfg = _run_config(ctx)
    if sizes is not None:
        try:
            cfg.block("sft")["sample_sizes"] = [int(s) for s in sizes.split(",") if s.strip()]
        except ValueError:
            raise click.BadParameter(f"not a list of integers: {sizes!r}", param_hint="--sizes") from None
    wanted = cfg.block("sft").get("sample_sizes") or []
    if not wanted:
        raise ConfigError("no sample sizes given (use --sizes or sft.sample_sizes)")
    lines = [line for line in _read_lines(in_path) if line.strip()]
    parsed = []
    for lineno, line in enumerate(lines, 1):
        try:
            parsed.append(SftRecord.from_json(json.loads(line)))
        except (json.JSONDecodeError, SelectionError) as e:
            raise SelectionError(f"{in_path}: record {lineno}: {e}") from e
    samples = sample_sft(list(range(len(lines))), sorted(wanted), cfg.seed)

    out = _out_dir(out)
    written = []
    report = {}
    for size, chosen in samples.items():
        path = out / f"sample_{size}.jsonl"
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.writelines(lines[i] + "\n" for i in chosen)
        written.append(path)
        zhs_non_english = count_zhs_non_english(parsed[i] for i in chosen)
        report[str(size)] = {"records": len(chosen), "zhs_non_english": zhs_non_english}
        display.status_update(f"sample {size:,}: {zhs_non_english:,} zhs<->xx pairs without en", "info")
    write_json(out / "samples.json", report)
    written.append(out / "samples.json")
    _finish(written, cfg, out, "sample-sft", {"in": in_path})


# -- evaluation -------------------------------------------------------------

def _scoring_records(path):
    for lineno, line in iter_lines(path):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}:{lineno}: {e}") from e
        if not isinstance(obj, dict) or "hyp" not in obj or "ref" not in obj:
            raise DataError(f"{path}:{lineno}: records need 'hyp' and 'ref'")
        yield obj


@cli.command()
@click.option("--hyp", type=INPUT_FILE, help="Hypotheses, one segment per line.")
@click.option("--ref", type=INPUT_FILE, help="References, one segment per line.")
@click.option("--records", type=INPUT_FILE, help="JSONL {hyp, ref, low_quality}; flagged records are excluded.")
@click.option("--vocab", type=INPUT_FILE, help="Tokenizer for spBLEU; whitespace tokens otherwise.")
@click.option("--smoothing", type=click.Choice(["exp", "none"]))
@click.option("--missing-flag", type=click.Choice(["keep", "error"]), help="Records without a low_quality flag.")
@click.option("--system", help="System name for the emitted score row.")
@click.option("--direction", help="Direction for the emitted score row, e.g. en->de.")
@click.option("--out", required=True, type=OUTPUT_DIR)
@click.pass_context
@reports_errors
def score(ctx, hyp, ref, records, vocab, smoothing, missing_flag, system, direction, out):
    """Corpus BLEU (spBLEU with --vocab) of hypotheses against references."""
    if records and (hyp or ref):
        raise click.UsageError("use either --records or --hyp/--ref")
    if not records and not (hyp and ref):
        raise click.UsageError("--hyp and --ref are required without --records")
    if bool(system) != bool(direction):
        raise click.UsageError("--system and --direction go together")
    d = _direction(direction) if direction else None
    cfg = _run_config(ctx)
    block = cfg.override("eval", smoothing=smoothing, missing_quality_flag=missing_flag)

    quality = None
    if records:
        kept, quality = wmt_ingest(_scoring_records(records), block.get("missing_quality_flag", "keep"))
        pairs = [(str(r["hyp"]), str(r["ref"])) for r in kept]
        hyp_texts, ref_texts = [h for h, _ in pairs], [r for _, r in pairs]
    else:
        hyp_texts, ref_texts = _read_lines(hyp), _read_lines(ref)
        if len(hyp_texts) != len(ref_texts):
            raise AlignmentError(f"{len(hyp_texts)} hypotheses but {len(ref_texts)} references")

    if vocab:
        result = spbleu(hyp_texts, ref_texts, load_vocab(vocab), smoothing=block["smoothing"])
        metric = "spbleu"
    else:
        result = corpus_bleu([h.split() for h in hyp_texts], [r.split() for r in ref_texts], smoothing=block["smoothing"])
        metric = "bleu"
    display.bleu(result, "spBLEU" if vocab else "BLEU")

    out = _out_dir(out)
    payload = {"metric": metric, "bleu": result.to_json()}
    if quality is not None:
        payload["quality"] = quality.to_json()
    write_json(out / "score.json", payload)
    written = [out / "score.json"]
    if system:
        row = {"system": system, "direction": str(d), "metric": metric, "value": result.score}
        write_jsonl(out / "scores.jsonl", [row])
        written.append(out / "scores.jsonl")
    _finish(written, cfg, out, "score", {"hyp": hyp, "ref": ref, "records": records, "vocab": vocab})


@cli.command("aggregate")
@click.option("--scores", "score_files", multiple=True, required=True, type=INPUT_FILE, help="Score JSONL or table transcription (.csv).")
@click.option("--groups", type=INPUT_FILE, help="JSON direction groups; the four default groups otherwise.")
@click.option("--system", "systems", multiple=True, help="Systems to report (all by default).")
@click.option("--metric", "metrics", multiple=True, help="Metrics to report.")
@click.option("--out", required=True, type=OUTPUT_DIR)
@click.pass_context
@reports_errors
def aggregate_cmd(ctx, score_files, groups, systems, metrics, out):
    """Average scores over direction groups."""
    cfg = _run_config(ctx)
    block = cfg.block("eval")
    if metrics:
        block["metrics"] = list(metrics)
    matrix = ingest_scores(score_files)
    table = aggregate(
        matrix,
        load_groups(groups) if groups else default_groups(),
        systems=list(systems) or None,
        metrics=block.get("metrics") or None,
    )
    display.grouped_table(table)

    out = _out_dir(out)
    write_json(out / "table.json", table.to_json())
    (out / "table.txt").write_text(table.render_text(), encoding="utf-8")
    _finish(
        [out / "table.json", out / "table.txt"], cfg, out, "aggregate",
        {"scores": list(score_files), "groups": groups, "systems": list(systems) or None},
    )


@cli.command()
@click.option("--dev-src", type=INPUT_FILE, help="Exemplar pool, source side.")
@click.option("--dev-tgt", type=INPUT_FILE, help="Exemplar pool, target side.")
@click.option("--queries", required=True, type=INPUT_FILE, help="Source segments to prompt for.")
@click.option("--direction", required=True, help="Direction, e.g. en->de.")
@click.option("--style", type=click.Choice(["icl", "instruction"]), default="icl", show_default=True)
@click.option("--k", type=int, help="Number of in-context exemplars.")
@click.option("--out", required=True, type=OUTPUT_DIR)
@click.pass_context
@reports_errors
def prompt(ctx, dev_src, dev_tgt, queries, direction, style, k, out):
    """Render in-context or instruction prompts for a file of queries."""
    d = _direction(direction)
    cfg = _run_config(ctx)
    block = cfg.override("eval", k=k)
    query_lines = _read_lines(queries)

    if style == "icl":
        if not (dev_src and dev_tgt):
            raise click.UsageError("--dev-src and --dev-tgt are required for in-context prompts")
        src_lines, tgt_lines = _read_lines(dev_src), _read_lines(dev_tgt)
        if len(src_lines) != len(tgt_lines):
            raise AlignmentError(f"exemplar pool: {len(src_lines)} source vs {len(tgt_lines)} target lines")
        k = int(block.get("k", 8))
        exemplars = select_exemplars(list(zip(src_lines, tgt_lines)), k, cfg.seed)
        rendered = [build_icl_prompt(exemplars, q, k).rendered for q in query_lines]
    else:
        names = display_names()
        rendered = [format_instruction(d, q, None, names) for q in query_lines]

    out = _out_dir(out)
    count = write_jsonl(out / "prompts.jsonl", ({"direction": str(d), "prompt": p} for p in rendered))
    display.status_update(f"{count:,} prompts for {d}", "success")
    _finish(
        [out / "prompts.jsonl"], cfg, out, "prompt",
        {"dev_src": dev_src, "dev_tgt": dev_tgt, "queries": queries, "direction": str(d), "style": style},
    )


# -- published-table reproduction -------------------------------------------

@cli.group()
def reproduce():
    """Recompute published tables from the bundled transcriptions."""


@reproduce.command("pfms")
@click.option("--out", type=OUTPUT_DIR, help="Also write the comparison as JSON.")
@click.pass_context
@reports_errors
def reproduce_pfms(ctx, out):
    """Replan all five budgets and compare every cell with the published tables."""
    tables = load_published_tables()
    avail = infer_availability(tables)
    rows, failures, exceptions, summary = [], [], [], []
    for table in tables:
        deviations = compare_to_published(plan_mix(table.budget_n, avail), table)
        outside = [d for d in deviations if not d.accepted]
        known = [d for d in deviations if not d.within() and d.known_exception]
        worst = max(deviations, key=lambda d: d.relative)
        rows.append(
            (
                table.budget_billions,
                str(len(deviations)),
                str(len(deviations) - len(outside) - len(known)),
                str(len(known)),
                f"{worst.relative:.4%}",
                f"{worst.lang} {worst.pool}",
            )
        )
        summary.append(
            {
                "budget_billions": table.budget_billions,
                "cells": len(deviations),
                "outside": [_deviation_json(d) for d in outside],
                "known_exceptions": [_deviation_json(d) for d in known],
                "max_relative": worst.relative,
            }
        )
        failures.extend(f"n={table.budget_billions} {_deviation_text(d)}" for d in outside)
        exceptions.extend(f"n={table.budget_billions} {_deviation_text(d)}" for d in known)
    display.reproduction(
        rows, "PFMS allocations vs published", ("n (B)", "Cells", "Within tolerance", "Known exceptions", "Max deviation", "Where")
    )
    if out:
        out = _out_dir(out)
        write_json(out / "reproduce_pfms.json", summary)
        display.wrote(out / "reproduce_pfms.json")
    if exceptions:
        display.issues("Known exceptions", exceptions)
    if failures:
        display.issues("Cells outside tolerance", failures)
        display.status_update(f"{len(failures)} cell(s) outside tolerance", "error")
        ctx.exit(1)
    display.status_update(
        f"every published cell reproduced within tolerance, apart from {len(exceptions)} known exception(s)", "success"
    )


@reproduce.command("sft")
@reports_errors
def reproduce_sft():
    """Replay the published per-direction SFT counts."""
    report = distribution_from_counts(load_published_sft_counts())
    display.sft_distribution(report)


@reproduce.command("aggregate")
@reports_errors
def reproduce_aggregate():
    """Average the FLORES+ transcriptions over the four direction groups."""
    matrix = load_published_scores("flores_gemma_en.csv").merge(load_published_scores("flores_gemma_zh.csv"))
    display.grouped_table(aggregate(matrix, default_groups(), metrics=["spbleu", "comet"]))


@reproduce.command("tokenization")
@click.option("--vocab", "vocabs", multiple=True, type=INPUT_FILE, help="Vocab assets to measure.")
@click.option("--flores-dir", type=click.Path(exists=True, file_okay=False), help="Directory of <code>.txt devtest files.")
@click.pass_context
@reports_errors
def reproduce_tokenization(ctx, vocabs, flores_dir):
    """Show the published efficiency table, and measure vocabs when assets are given."""
    display.published_efficiency(published_efficiency())
    if not (vocabs and flores_dir):
        display.status_update("pass --vocab and --flores-dir to measure tokenizers", "info")
        return
    base = Path(flores_dir)
    english_file = base / "en.txt"
    if not english_file.is_file():
        raise DataError(f"{english_file} not found")
    aligned = {
        t.code: _read_lines(base / f"{t.code}.txt")
        for t in load_registry()
        if t.code != "en" and (base / f"{t.code}.txt").is_file()
    }
    english_lines = _read_lines(english_file)
    workers = _run_config(ctx).workers
    reports = [corpus_efficiency(load_vocab(v), aligned, english_lines, workers=workers) for v in vocabs]
    display.efficiency(efficiency_table(reports))


if __name__ == "__main__":
    cli()
