"""Hybrid semantic + structural retrieval over the event graph.

Every candidate event e (with embedding and text) is scored

    H(e) = alpha * cos(e, q) + beta * S(e)

where S(e) is 1 exactly when the event has at least one causal edge.
Events with H(e) >= tau are ranked by descending score (ties broken by
ascending event id) and the top k are returned with their collected
neighbor texts. The scan is exhaustive and exact: desk-scale corpora make
approximate indexes unnecessary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from causeway.errors import DimensionMismatchError, ZeroVectorError
from causeway.store import EMBEDDING_DIM, GraphStore

# Weights recovered from the published retrieval scores under alpha+beta=1;
# tau defaults low so few-shot sets are not silently empty.
DEFAULT_ALPHA = 0.6
DEFAULT_BETA = 0.4
DEFAULT_TAU = 0.2
DEFAULT_TOP_K = 5


@dataclass(frozen=True)
class HybridConfig:
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    tau: float = DEFAULT_TAU
    k: int = DEFAULT_TOP_K

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.alpha + self.beta <= 0:
            raise ValueError("alpha + beta must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")


def cosine(a, b) -> float:
    """Cosine similarity in [-1, 1]; both vectors must be nonzero."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise DimensionMismatchError(f"shape mismatch: {va.shape} vs {vb.shape}")
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVectorError("cosine undefined for zero-norm vector")
    value = float(np.dot(va, vb)) / (norm_a * norm_b)
    return max(-1.0, min(1.0, value))


def structural_score(counts: tuple[int, int, int]) -> int:
    """1 if the event has any causal edge, else 0."""
    if any(c < 0 for c in counts):
        raise ValueError("neighbor counts must be non-negative")
    return 1 if sum(counts) > 0 else 0


def hybrid_score(sim: float, structural: int, cfg: HybridConfig) -> float:
    return cfg.alpha * sim + cfg.beta * structural


@dataclass(frozen=True)
class RetrievalResult:
    event_id: str
    event_text: str
    hybrid_score: float
    embedding_similarity: float
    structural_score: int
    cause_count: int
    effect_count: int
    trigger_count: int
    cause_texts: tuple[str, ...]
    effect_texts: tuple[str, ...]
    trigger_texts: tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "text": self.event_text,
            "event_id": self.event_id,
            "hybrid_score": self.hybrid_score,
            "embedding_similarity": self.embedding_similarity,
            "structural_score": self.structural_score,
            "effect_count": self.effect_count,
            "cause_count": self.cause_count,
            "trigger_count": self.trigger_count,
            "effect_texts": list(self.effect_texts),
            "cause_texts": list(self.cause_texts),
            "trigger_texts": list(self.trigger_texts),
        }


def query(store: GraphStore, q, cfg: HybridConfig) -> list[RetrievalResult]:
    """Score, filter and rank candidate events; empty store yields [].

    Considers exactly the events with non-null embedding and text. Neighbor
    texts are collected only for the surviving top-k candidates.
    """
    qv = np.asarray(q, dtype=np.float64)
    if qv.shape != (EMBEDDING_DIM,):
        raise DimensionMismatchError(
            f"query vector must have shape ({EMBEDDING_DIM},), got {qv.shape}"
        )
    if float(np.linalg.norm(qv)) == 0.0:
        raise ZeroVectorError("query vector has zero norm")

    scored = []
    for event in store.events_with_embeddings():
        counts = store.neighbor_counts(event.id)
        s = structural_score(counts)
        sim = cosine(event.embedding, qv)
        h = hybrid_score(sim, s, cfg)
        if h >= cfg.tau:
            scored.append((h, sim, s, counts, event))
    scored.sort(key=lambda item: (-item[0], item[4].id))

    results = []
    for h, sim, s, counts, event in scored[: cfg.k]:
        cause_texts, effect_texts, trigger_texts = store.collect_texts(event.id)
        results.append(
            RetrievalResult(
                event_id=event.id,
                event_text=event.text,
                hybrid_score=h,
                embedding_similarity=sim,
                structural_score=s,
                cause_count=counts[0],
                effect_count=counts[1],
                trigger_count=counts[2],
                cause_texts=tuple(cause_texts),
                effect_texts=tuple(effect_texts),
                trigger_texts=tuple(trigger_texts),
            )
        )
    return results


@dataclass(frozen=True)
class FewShotExample:
    rank: int
    event_id: str
    event_text: str
    cause_texts: tuple[str, ...]
    effect_texts: tuple[str, ...]
    trigger_texts: tuple[str, ...]
    tagged_text: str
    label: int
    reconstruction_ok: bool
    unplaced: tuple[tuple[str, str], ...] = field(default=())


def reconstruct_tagged(
    event_text: str,
    cause_texts,
    effect_texts,
    trigger_texts,
) -> tuple[str, bool, list[tuple[str, str]]]:
    """Wrap each neighbor text's first free occurrence in its kind tag.

    Occurrences are claimed left to right without overlap. If any text has
    no free occurrence, the event text is returned untagged and the
    stragglers are listed (reconstruction failure is flagged, not raised).
    """
    wanted = (
        [("cause", t) for t in cause_texts]
        + [("effect", t) for t in effect_texts]
        + [("trigger", t) for t in trigger_texts]
    )
    claimed: list[tuple[int, int, str]] = []  # start, end, tag name
    unplaced: list[tuple[str, str]] = []
    for tag, text in wanted:
        placed = False
        if text:
            search_from = 0
            while True:
                idx = event_text.find(text, search_from)
                if idx == -1:
                    break
                end = idx + len(text)
                if all(end <= s or e <= idx for s, e, _ in claimed):
                    claimed.append((idx, end, tag))
                    placed = True
                    break
                search_from = idx + 1
        if not placed:
            unplaced.append((tag, text))
    if unplaced:
        return event_text, False, unplaced

    tagged = event_text
    for start, end, tag in sorted(claimed, reverse=True):
        tagged = (
            tagged[:start]
            + f"<{tag}>{tagged[start:end]}</{tag}>"
            + tagged[end:]
        )
    return tagged, True, []


def to_fewshot_examples(results: list[RetrievalResult]) -> list[FewShotExample]:
    """One example per result, rank order preserved.

    The exemplar label is the structural score: an event without any causal
    edge serves as a non-causal (label 0) example.
    """
    examples = []
    for rank, result in enumerate(results, start=1):
        tagged, ok, unplaced = reconstruct_tagged(
            result.event_text,
            result.cause_texts,
            result.effect_texts,
            result.trigger_texts,
        )
        examples.append(
            FewShotExample(
                rank=rank,
                event_id=result.event_id,
                event_text=result.event_text,
                cause_texts=result.cause_texts,
                effect_texts=result.effect_texts,
                trigger_texts=result.trigger_texts,
                tagged_text=tagged,
                label=result.structural_score,
                reconstruction_ok=ok,
                unplaced=tuple(unplaced),
            )
        )
    return examples
