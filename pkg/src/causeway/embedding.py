"""Embedding lifecycle: clean, rebuild indexes, batch-embed, verify.

The full cycle mirrors the graph-side embedding update procedure:

    1. clean_embeddings   - null out every stored vector
    2. rebuild_indexes    - drop and recreate the four cosine indexes (dim 384)
    3. batch_embed        - embed every node with non-null text, in batches
    4. verify             - per-kind totals vs embedded counts

Providers must be deterministic and are L2-normalized at ingestion, so the
retrieval cosine reduces to a dot product.
"""

from __future__ import annotations

import hashlib
import logging
import os
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from causeway.errors import DimensionMismatchError, ProviderFailureError
from causeway.store import EMBEDDING_DIM, GraphStore, Node, NodeKind, check_embedding

logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 64


class EmbeddingProvider(ABC):
    """Maps text to a deterministic 384-dim vector."""

    name: str = "provider"
    dimension: int = EMBEDDING_DIM

    @abstractmethod
    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        ...

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]


class HashEmbeddingProvider(EmbeddingProvider):
    """Deterministic mock: keyed blake2b of the text seeds a unit Gaussian.

    Equal texts map to equal vectors; distinct texts collide with
    negligible probability. Intended for tests and offline runs.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.name = f"mock-hash-{seed}"
        self._key = seed.to_bytes(8, "little", signed=True)

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        out = []
        for text in texts:
            digest = hashlib.blake2b(text.encode("utf-8"), key=self._key).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:16], "little"))
            vec = rng.standard_normal(self.dimension)
            out.append(vec / np.linalg.norm(vec))
        return out


def mock_provider(seed: int = 0) -> HashEmbeddingProvider:
    return HashEmbeddingProvider(seed)


class HttpEmbeddingProvider(EmbeddingProvider):
    """Client for an OpenAI-style /embeddings endpoint (384-dim models).

    POSTs ``{"model": ..., "input": [texts]}`` and reads
    ``{"data": [{"embedding": [...]}, ...]}``. The API key is read from the
    environment variable named by ``api_key_env``.
    """

    def __init__(
        self,
        endpoint: str,
        model: str = "all-MiniLM-L6-v2",
        api_key_env: str = "CAUSEWAY_EMBED_API_KEY",
        timeout: float = 30.0,
        session=None,
    ):
        if session is None:
            import requests

            session = requests.Session()
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.session = session
        self.name = f"http-{model}"

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        headers = {}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        try:
            response = self.session.post(
                self.endpoint,
                json={"model": self.model, "input": list(texts)},
                headers=headers,
                timeout=self.timeout,
            )
            response.raise_for_status()
            payload = response.json()
            rows = payload["data"]
            vectors = [np.asarray(row["embedding"], dtype=np.float64) for row in rows]
        except Exception as exc:
            raise ProviderFailureError(f"embedding request failed: {exc}") from exc
        if len(vectors) != len(texts):
            raise ProviderFailureError(
                f"provider returned {len(vectors)} vectors for {len(texts)} texts"
            )
        return vectors


@dataclass
class VectorIndex:
    """Kind-scoped exact cosine index: node id -> unit vector."""

    name: str
    kind: NodeKind
    dimension: int = EMBEDDING_DIM
    metric: str = "cosine"
    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, node_id: str, vector) -> None:
        self.entries[node_id] = check_embedding(vector)

    def __len__(self) -> int:
        return len(self.entries)


def index_name(kind: NodeKind) -> str:
    return f"{kind.value.lower()}_embedding_index"


def clean_embeddings(store: GraphStore) -> int:
    """Null every node embedding; returns how many were cleared."""
    embedded = [n.id for n in store.nodes() if n.embedding is not None]
    store.set_embeddings((node_id, None) for node_id in embedded)
    for index in store.indexes.values():
        index.entries.clear()
    return len(embedded)


def rebuild_indexes(store: GraphStore) -> dict[NodeKind, VectorIndex]:
    """Drop any existing vector indexes and create four fresh empty ones."""
    store.indexes = {
        kind: VectorIndex(name=index_name(kind), kind=kind) for kind in NodeKind
    }
    return store.indexes


@dataclass
class EmbedReport:
    embedded_counts: dict[NodeKind, int] = field(
        default_factory=lambda: {k: 0 for k in NodeKind}
    )
    batches_issued: int = 0
    retries: int = 0

    @property
    def total_embedded(self) -> int:
        return sum(self.embedded_counts.values())

    def as_dict(self) -> dict:
        return {
            "embedded": {k.value: v for k, v in self.embedded_counts.items()},
            "total_embedded": self.total_embedded,
            "batches_issued": self.batches_issued,
            "retries": self.retries,
        }


def _eligible_nodes(store: GraphStore) -> list[Node]:
    return [n for n in store.nodes() if n.text is not None and n.embedding is None]


def batch_embed(
    store: GraphStore,
    provider: EmbeddingProvider,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> EmbedReport:
    """Embed every node with non-null text that has no embedding yet.

    Each batch is retried once on provider failure; a second failure aborts
    with a ProviderFailureError carrying the partial-progress report.
    Re-running after completion embeds nothing (idempotent).
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if provider.dimension != EMBEDDING_DIM:
        raise DimensionMismatchError(
            f"provider dimension {provider.dimension} != {EMBEDDING_DIM}"
        )
    eligible = _eligible_nodes(store)
    report = EmbedReport()
    for offset in range(0, len(eligible), batch_size):
        batch = eligible[offset : offset + batch_size]
        texts = [n.text for n in batch]
        try:
            vectors = provider.embed_batch(texts)
        except Exception:
            report.retries += 1
            try:
                vectors = provider.embed_batch(texts)
            except Exception as exc:
                raise ProviderFailureError(
                    f"batch {report.batches_issued + 1} failed twice: {exc}",
                    report=report,
                ) from exc
        if len(vectors) != len(batch):
            raise ProviderFailureError(
                f"provider returned {len(vectors)} vectors for {len(batch)} texts",
                report=report,
            )
        normalized = []
        for node, vec in zip(batch, vectors):
            arr = check_embedding(vec)
            norm = np.linalg.norm(arr)
            if norm == 0.0:
                raise ProviderFailureError(
                    f"provider returned a zero vector for node {node.id!r}",
                    report=report,
                )
            normalized.append((node.id, arr / norm))
        store.set_embeddings(normalized)  # one writer-lock hold per batch
        for (node_id, vec), node in zip(normalized, batch):
            report.embedded_counts[node.kind] += 1
            index = store.indexes.get(node.kind)
            if index is not None:
                index.add(node_id, vec)
        report.batches_issued += 1
    logger.info(
        "embedded %d node(s) in %d batch(es)",
        report.total_embedded,
        report.batches_issued,
    )
    return report


@dataclass
class VerificationRow:
    kind: NodeKind
    total: int
    with_text: int
    embedded: int

    @property
    def deficit(self) -> int:
        return self.with_text - self.embedded


@dataclass
class VerificationReport:
    rows: list[VerificationRow]

    @property
    def ok(self) -> bool:
        return all(row.deficit == 0 for row in self.rows)

    @property
    def flagged(self) -> list[NodeKind]:
        return [row.kind for row in self.rows if row.deficit > 0]

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "rows": [
                {
                    "kind": row.kind.value,
                    "total": row.total,
                    "with_text": row.with_text,
                    "embedded": row.embedded,
                    "deficit": row.deficit,
                }
                for row in self.rows
            ],
        }


def verify(store: GraphStore) -> VerificationReport:
    """Per-kind totals, text-bearing counts and embedded counts."""
    rows = []
    for kind in NodeKind:
        nodes = store.nodes(kind)
        rows.append(
            VerificationRow(
                kind=kind,
                total=len(nodes),
                with_text=sum(1 for n in nodes if n.text is not None),
                embedded=sum(1 for n in nodes if n.embedding is not None),
            )
        )
    return VerificationReport(rows)
