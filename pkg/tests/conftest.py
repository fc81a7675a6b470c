import json
import random

import pytest
from click.testing import CliRunner

from mtforge.corpus_model import SentencePair, get_language
from mtforge.tokenization import VocabTokenizer


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    """Keep ~/.mtforge/config.json of the machine out of every test."""
    home = tmp_path / "home"
    home.mkdir()
    monkeypatch.setenv("HOME", str(home))
    monkeypatch.delenv("MTFORGE_LOG", raising=False)
    return home


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def letters_vocab():
    """Lowercase letters, a few words with the space marker, byte fallback on."""
    pieces = list("abcdefghijklmnopqrstuvwxyz") + ["▁", "▁the", "▁cat", "the", "cat", "ing"]
    return VocabTokenizer("letters", tuple(pieces), byte_fallback=True, space_marker="▁")


@pytest.fixture
def byte_vocab():
    """ASCII letters without a space marker; everything else falls back to bytes."""
    pieces = [chr(c) for c in range(ord("a"), ord("z") + 1)] + ["th", "the", "ing"]
    return VocabTokenizer("bytes", tuple(pieces), byte_fallback=True)


def make_pair(src_text, tgt_text, src="en", tgt="de", **kwargs):
    return SentencePair(get_language(src), get_language(tgt), src_text, tgt_text, **kwargs)


@pytest.fixture
def pair():
    return make_pair


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def write_jsonl_file(path, records):
    return write_lines(path, [json.dumps(r, ensure_ascii=False) for r in records])


WORDS = [
    "the", "cat", "sat", "on", "mat", "dog", "ran", "far", "home", "is",
    "red", "blue", "we", "go", "now", "light", "river", "stone", "ate", "green",
]


def random_sentence(rng: random.Random, low: int = 3, high: int = 12) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(low, high)))
