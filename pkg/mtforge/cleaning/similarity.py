# mtforge/cleaning/similarity.py
"""
Semantic-similarity filtering behind a pluggable embedding provider.

Providers:
    HashingEmbedder      hashed bag of character n-grams; for tests only, not
                         semantically meaningful across languages
    PrecomputedEmbedder  vectors read from a JSONL file keyed by sha256(text)
    SubprocessEmbedder   JSONL request/response over a child process's stdio
"""

import hashlib
import json
import logging
import subprocess
from typing import Dict, Optional, Protocol, Sequence

import numpy as np

from mtforge.cleaning.heuristics import FilterDecision, FilterReason
from mtforge.corpus_model import SentencePair
from mtforge.errors import EmbeddingError
from mtforge.utils.jsonl import dumps, iter_lines

logger = logging.getLogger(__name__)


class EmbeddingProvider(Protocol):
    def embed(self, text: str) -> np.ndarray:
        ...


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; a zero vector on either side gives 0.0."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise EmbeddingError(f"embedding dimensions differ: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def similarity_filter(p: SentencePair, embed: EmbeddingProvider, threshold: float) -> FilterDecision:
    """
    Raises:
        EmbeddingError: the provider failed on either side
    """
    try:
        u = embed.embed(p.src_text)
        v = embed.embed(p.tgt_text)
    except EmbeddingError:
        raise
    except Exception as e:
        raise EmbeddingError(f"embedding provider failed: {e}") from e
    cos = cosine(u, v)
    if cos < threshold:
        return FilterDecision.drop(FilterReason.LOW_SIMILARITY, repr(round(cos, 6)))
    return FilterDecision.ok()


def content_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class HashingEmbedder:
    """Hashed character n-gram counts. Deterministic; test fixture only."""

    def __init__(self, dim: int = 256, orders: Sequence[int] = (1, 2, 3)):
        self.dim = dim
        self.orders = tuple(orders)

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for n in self.orders:
            for i in range(len(text) - n + 1):
                digest = hashlib.blake2b(text[i:i + n].encode("utf-8"), digest_size=4).digest()
                vec[int.from_bytes(digest, "big") % self.dim] += 1.0
        return vec


class PrecomputedEmbedder:
    """Vectors from a JSONL file of {"key": sha256(text), "vector": [...]}."""

    def __init__(self, path):
        self.path = path
        self._vectors: Dict[str, np.ndarray] = {}
        dim: Optional[int] = None
        for lineno, line in iter_lines(path):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                vec = np.asarray(obj["vector"], dtype=np.float64)
                key = str(obj["key"])
            except (ValueError, KeyError, TypeError) as e:
                raise EmbeddingError(f"{path}:{lineno}: bad vector record: {e}") from e
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape != (dim,):
                raise EmbeddingError(f"{path}:{lineno}: dimension {vec.shape} differs from {dim}")
            self._vectors[key] = vec
        logger.info("loaded %d precomputed vectors from %s", len(self._vectors), path)

    def embed(self, text: str) -> np.ndarray:
        vec = self._vectors.get(content_key(text))
        if vec is None:
            raise EmbeddingError(f"no precomputed vector for text {text[:40]!r}")
        return vec


class SubprocessEmbedder:
    """
    Talks to a child process: one {"id", "text"} request line on stdin, one
    {"id", "vector"} response line on stdout.
    """

    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        self._next_id = 0
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as e:
            raise EmbeddingError(f"cannot start embedder {self.command[0]!r}: {e}") from e

    def embed(self, text: str) -> np.ndarray:
        request_id = self._next_id
        self._next_id += 1
        try:
            self._proc.stdin.write(dumps({"id": request_id, "text": text}) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except (OSError, ValueError) as e:
            raise EmbeddingError(f"embedder pipe failed: {e}") from e
        if not line:
            raise EmbeddingError("embedder closed its output")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise EmbeddingError(f"embedder sent invalid JSON: {e}") from e
        if obj.get("id") != request_id:
            raise EmbeddingError(f"embedder answered id {obj.get('id')!r}, expected {request_id}")
        return np.asarray(obj["vector"], dtype=np.float64)

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
