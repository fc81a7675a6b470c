import gzip
import json

import pytest

from mtforge.corpus_model import (
    REGISTRY_SIZE,
    Direction,
    RecordError,
    ResourceClass,
    StreamFormat,
    display_names,
    get_language,
    is_known_language,
    load_registry,
    merge_side_channels,
    pair_from_json,
    pair_to_json,
    parse_monolingual_stream,
    parse_parallel_stream,
)
from mtforge.errors import UnknownLanguageError, UnreadableStreamError


def test_registry_has_46_languages_with_pivots():
    registry = load_registry()
    codes = [t.code for t in registry]
    assert len(registry) == REGISTRY_SIZE
    assert len(set(codes)) == REGISTRY_SIZE
    assert "en" in codes and "zhs" in codes and "zht" in codes


def test_registry_metadata():
    km = get_language("km")
    assert km.name == "Khmer"
    assert km.resource_class in set(ResourceClass)
    assert display_names()["zhs"] == "Chinese (Simplified)"


@pytest.mark.parametrize("alias,code", [("zh", "zhs"), ("ZH-TW", "zht"), ("no", "nb"), ("fil", "tl")])
def test_aliases_resolve(alias, code):
    assert get_language(alias).code == code
    assert is_known_language(alias)


def test_unknown_language():
    with pytest.raises(UnknownLanguageError) as info:
        get_language("xx")
    assert info.value.code == "xx"
    assert not is_known_language("klingon")


def test_direction_parse_and_format():
    d = Direction.parse("en->de")
    assert str(d) == "en->de"
    assert Direction.parse("en→de") == d
    assert d.involves("de") and not d.involves("fr")


def test_self_direction_rejected():
    with pytest.raises(ValueError):
        Direction.of("de", "de")
    with pytest.raises(ValueError):
        Direction.parse("en->de->fr")


def _jsonl(*records):
    return [r if isinstance(r, str) else json.dumps(r, ensure_ascii=False) for r in records]


def test_parallel_stream_routes_bad_lines_to_side_channel():
    lines = _jsonl(
        {"src_lang": "en", "tgt_lang": "de", "src_text": "Hello", "tgt_text": "Hallo"},
        "{not json",
        {"src_lang": "en", "tgt_lang": "xx", "src_text": "a", "tgt_text": "b"},
        {"src_lang": "de", "tgt_lang": "de", "src_text": "a", "tgt_text": "b"},
        {"src_lang": "en", "tgt_lang": "fr"},
        "",
        {"src_lang": "en", "tgt_lang": "fr", "src_text": 3, "tgt_text": "trois"},
        {"src_lang": "zh", "tgt_lang": "en", "src_text": "你好", "tgt_text": "Hi"},
    )
    errors = []
    pairs = list(parse_parallel_stream(lines, on_error=errors.append))

    assert [(p.src_lang.code, p.tgt_lang.code) for p in pairs] == [("en", "de"), ("zhs", "en")]
    assert pairs[1].src_text == "你好"
    assert [(e.line, e.reason) for e in errors] == [
        (2, "json"),
        (3, "unknown language"),
        (4, "self-direction"),
        (5, "missing field"),
        (7, "type"),
    ]


def test_parallel_stream_keeps_blank_sides_for_cleaning():
    lines = _jsonl({"src_lang": "en", "tgt_lang": "de", "src_text": "Hello", "tgt_text": "   "})
    pairs = list(parse_parallel_stream(lines, on_error=pytest.fail))
    assert len(pairs) == 1 and pairs[0].has_blank_side


def test_parallel_stream_tsv():
    lines = ["en\tfr\tcat\tchat", "en\tfr\tonly three", "fr\ten\tchien\tdog"]
    errors = []
    pairs = list(parse_parallel_stream(lines, StreamFormat.TSV, on_error=errors.append, shard=3))
    assert [p.tgt_text for p in pairs] == ["chat", "dog"]
    assert errors == [RecordError(2, "arity", "expected 4 columns, got 3", 3)]


def test_parallel_stream_reads_gzip(tmp_path):
    path = tmp_path / "pairs.jsonl.gz"
    with gzip.open(path, "wt", encoding="utf-8") as f:
        f.write(json.dumps({"src_lang": "en", "tgt_lang": "ja", "src_text": "tea", "tgt_text": "お茶"}) + "\n")
    pairs = list(parse_parallel_stream(path))
    assert pairs[0].tgt_text == "お茶"


def test_undecodable_stream_is_fatal(tmp_path):
    path = tmp_path / "broken.jsonl"
    path.write_bytes(b'{"src_lang": "en"}\n\xff\xfe\xfa\n')
    with pytest.raises(UnreadableStreamError):
        list(parse_parallel_stream(path, on_error=lambda e: None))


def test_monolingual_plain_text_with_header():
    lines = ["#lang=km", "first", "", "second"]
    errors = []
    records = list(parse_monolingual_stream(lines, on_error=errors.append))
    assert [r.text for r in records] == ["first", "second"]
    assert all(r.lang.code == "km" for r in records)
    assert [(e.line, e.reason) for e in errors] == [(3, "empty")]


def test_monolingual_jsonl_token_counts():
    lines = _jsonl(
        {"lang": "de", "text": "Guten Tag", "token_count": 3, "tokenizer": "letters"},
        {"lang": "de", "text": "x", "token_count": -1},
        {"lang": "de"},
    )
    errors = []
    records = list(parse_monolingual_stream(lines, on_error=errors.append))
    assert records[0].token_count == 3 and records[0].tokenizer == "letters"
    assert [e.reason for e in errors] == ["token_count", "missing field"]


def test_merge_side_channels_orders_by_shard_then_line():
    shard1 = [RecordError(5, "json", shard=1), RecordError(2, "json", shard=1)]
    shard0 = [RecordError(9, "arity", shard=0)]
    merged = merge_side_channels([shard1, shard0])
    assert [(e.shard, e.line) for e in merged] == [(0, 9), (1, 2), (1, 5)]


def test_pair_json_form(pair):
    p = pair("A cat.", "Eine Katze.", scores={"xcomet": 0.9}, provenance="crawl")
    obj = pair_to_json(p)
    assert obj == {
        "src_lang": "en",
        "tgt_lang": "de",
        "src_text": "A cat.",
        "tgt_text": "Eine Katze.",
        "scores": {"xcomet": 0.9},
        "provenance": "crawl",
    }
    assert pair_from_json(obj) == p


def test_pairs_survive_a_jsonl_round_trip(pair):
    pairs = [
        pair("line one\nline two", "Zeile eins\nZeile zwei"),
        pair("tab\there", "Tab\thier", scores={"xcomet": 0.5}, provenance="web"),
        pair("你好", "Hallo", src="zhs"),
        pair("  ", "leer"),
    ]
    lines = [json.dumps(pair_to_json(p), ensure_ascii=False) for p in pairs]
    assert list(parse_parallel_stream(lines, on_error=pytest.fail)) == pairs


def test_tsv_text_cannot_hold_tabs():
    errors = []
    pairs = list(parse_parallel_stream(["en\tde\ta\tb\tc"], StreamFormat.TSV, on_error=errors.append))
    assert pairs == [] and errors[0].reason == "arity"
