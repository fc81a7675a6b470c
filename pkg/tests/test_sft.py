import random

import pytest

from mtforge.corpus_model import Direction
from mtforge.errors import MissingDisplayNameError, PolicyError, PromptError, SampleSizeError, SelectionError
from mtforge.sft import (
    Candidate,
    CandidateSet,
    DistributionReport,
    SelectionPolicy,
    build_sft,
    count_zhs_non_english,
    distribution_from_counts,
    format_instruction,
    load_published_sft_counts,
    parse_candidate_set,
    parse_instruction,
    sample_sft,
    select_best,
    sft_meta,
    threshold_filter,
)

EN_DE = Direction.of("en", "de")


def cset(*score_dicts, direction=EN_DE, src="hello"):
    candidates = tuple(
        Candidate(text=f"cand {i}", generator=f"gen{i}", scores=scores) for i, scores in enumerate(score_dicts)
    )
    return CandidateSet(direction, src, candidates)


# -- selection --------------------------------------------------------------

def test_argmax():
    policy = SelectionPolicy(metric="xcomet")
    assert select_best(cset({"xcomet": 0.8}, {"xcomet": 0.9}, {"xcomet": 0.7}), policy) == (1, 0.9)


def test_ties_go_to_the_first_candidate():
    policy = SelectionPolicy(metric="xcomet")
    assert select_best(cset({"xcomet": 0.9}, {"xcomet": 0.9}), policy)[0] == 0


def test_mean_policy():
    policy = SelectionPolicy(metric="mean(a, b)", threshold=0.5)
    index, score = select_best(cset({"a": 0.8, "b": 0.6}, {"a": 0.7, "b": 0.9}), policy)
    assert index == 1
    assert score == pytest.approx(0.8)


def test_missing_score_names_candidate_and_metric():
    policy = SelectionPolicy()
    with pytest.raises(SelectionError, match="candidate 1 .*'cometkiwi'"):
        select_best(cset({"xcomet": 0.9, "cometkiwi": 0.9}, {"xcomet": 0.9}), policy)


@pytest.mark.parametrize("seed", range(20))
def test_choice_is_scale_invariant(seed):
    rng = random.Random(seed)
    scores = [{"m": rng.random()} for _ in range(rng.randint(1, 8))]
    factor = rng.uniform(0.1, 10)
    policy = SelectionPolicy(metric="m", threshold=0.0)
    scaled = [{"m": s["m"] * factor} for s in scores]
    assert select_best(cset(*scores), policy)[0] == select_best(cset(*scaled), policy)[0]


@pytest.mark.parametrize("score,kept", [(0.90, True), (0.85, True), (0.80, False)])
def test_threshold_is_inclusive(score, kept):
    assert threshold_filter((Candidate("x", "g", {}), score), 0.85) is kept


@pytest.mark.parametrize(
    "kwargs",
    [{"metric": "mean(xcomet"}, {"metric": "x comet"}, {"threshold": 1.5}, {"tie_break": "Random"}],
)
def test_unresolvable_policy(kwargs):
    with pytest.raises(PolicyError):
        SelectionPolicy(**kwargs)


def test_parse_candidate_set_forms():
    by_direction = parse_candidate_set(
        {"direction": "en->de", "src_text": "hi", "candidates": [{"text": "hallo", "generator": "g", "scores": {"xcomet": 0.9}}]}
    )
    by_langs = parse_candidate_set(
        {"src_lang": "en", "tgt_lang": "de", "src_text": "hi", "candidates": [{"text": "hallo", "generator": "g", "scores": {"xcomet": 0.9}}]}
    )
    assert by_direction == by_langs
    with pytest.raises(SelectionError):
        parse_candidate_set({"direction": "en->de", "src_text": "hi"})


# -- instruction template ---------------------------------------------------

def test_inference_form():
    assert format_instruction(EN_DE, "hello") == "Translate this from English to German:\nEnglish: hello\nGerman:"


def test_training_form_appends_directly():
    assert format_instruction(EN_DE, "hello", "hallo") == (
        "Translate this from English to German:\nEnglish: hello\nGerman:hallo"
    )


def test_display_names_from_registry():
    prompt = format_instruction(Direction.of("zhs", "yue"), "你好")
    assert prompt.startswith("Translate this from Chinese (Simplified) to ")


def test_missing_display_name():
    with pytest.raises(MissingDisplayNameError):
        format_instruction(EN_DE, "hello", names={"en": "English"})


def test_instruction_parses_back():
    prompt = format_instruction(Direction.of("fr", "ja"), "Bonjour: le monde")
    assert parse_instruction(prompt) == (Direction.of("fr", "ja"), "Bonjour: le monde", None)
    training = format_instruction(EN_DE, "hello", "hallo")
    assert parse_instruction(training) == (EN_DE, "hello", "hallo")
    assert training[: -len("hallo")] == format_instruction(EN_DE, "hello")
    with pytest.raises(PromptError):
        parse_instruction("Translate this please")


# -- build and distribution -------------------------------------------------

def test_build_sft_accounting():
    policy = SelectionPolicy(metric="xcomet", threshold=0.85)
    sets = [
        cset({"xcomet": 0.9}, {"xcomet": 0.95}),
        cset({"xcomet": 0.5}),
        cset({"other": 0.99}),
        cset({"xcomet": 0.88}, direction=Direction.of("zhs", "ja"), src="你好"),
    ]
    errors = []
    records, report = build_sft(sets, policy, on_error=lambda i, e: errors.append(i))
    records = list(records)
    assert [r.completion for r in records] == ["cand 1", "cand 0"]
    assert records[0].score == 0.95 and records[0].generator == "gen1"
    assert records[0].prompt == "Translate this from English to German:\nEnglish: hello\nGerman:"
    assert all(r.score >= policy.threshold for r in records)
    assert errors == [2]
    assert report.inputs == report.total + report.below_threshold + report.errored == 4
    assert report.counts == {"en->de": 1, "zhs->ja": 1}
    assert report.zhs_non_english == 1 == count_zhs_non_english(records)
    assert report.policy == {"metric": "xcomet", "threshold": 0.85, "tie_break": "FirstIndex"}


@pytest.mark.parametrize("seed", range(10))
def test_raising_the_threshold_keeps_a_subset(seed):
    rng = random.Random(seed)
    sets = [cset({"m": rng.random()}, {"m": rng.random()}, src=f"s{i}") for i in range(30)]

    def kept(tau):
        records, _ = build_sft(sets, SelectionPolicy(metric="m", threshold=tau))
        return {r.prompt for r in records}

    assert kept(0.8) <= kept(0.5)


def test_empty_input_gives_empty_report():
    records, report = build_sft([], SelectionPolicy())
    assert list(records) == []
    assert (report.total, report.directions, report.en_centric_share) == (0, 0, 0.0)


def test_published_distribution():
    counts = load_published_sft_counts()
    report = distribution_from_counts(counts)
    assert report.directions == 192
    assert report.total == pytest.approx(264_000, rel=0.01)
    assert report.en_centric_share * 100 == pytest.approx(94.5, abs=0.3)
    assert report.zhs_centric_share * 100 == pytest.approx(7.4, abs=0.3)
    assert report.overlap == counts["en->zhs"] + counts["zhs->en"] == 19_204
    assert report.counts["en->de"] == 27_249
    assert report.zhs_non_english == 400


def test_reports_merge():
    a = distribution_from_counts({"en->de": 3, "de->en": 1})
    b = distribution_from_counts({"en->de": 2, "zhs->ja": 4})
    merged = a.merge(b)
    assert merged.counts == {"en->de": 5, "de->en": 1, "zhs->ja": 4}
    assert merged.total == 10


def test_render_text_three_columns():
    report = distribution_from_counts({"en->de": 27_249, "de->en": 23_071, "en->fr": 100, "zhs->ja": 5})
    lines = report.render_text().splitlines()
    assert lines[0].startswith("en->de") and "27,249" in lines[0]
    assert lines[-1].startswith("total 50,425 over 4 directions")


def test_training_meta_is_echoed_verbatim():
    report = DistributionReport(training_meta=sft_meta())
    assert report.to_json()["training_meta"]["LR Scheduler"] == "inverse sqrt"


# -- sampling ---------------------------------------------------------------

def test_nested_samples():
    records = list(range(10))
    samples = sample_sft(records, [2, 4], seed=3)
    assert set(samples[2]) <= set(samples[4])
    assert samples[4][:2] == samples[2]
    assert sample_sft(records, [2, 4], seed=3) == samples


def test_sample_larger_than_population():
    with pytest.raises(SampleSizeError):
        sample_sft(list(range(3)), [5], seed=0)


def test_zhs_pairs_without_english_in_a_large_sample():
    counts = load_published_sft_counts()
    population = [d for d, c in counts.items() for _ in range(c)]
    sample = sample_sft(population, [100_000], seed=0)[100_000]
    observed = sum(1 for d in sample if "zhs" in d.split("->") and "en" not in d.split("->"))
    # 400 of 264,005 in expectation scale to about 152 of 100,000
    assert 80 < observed < 230
