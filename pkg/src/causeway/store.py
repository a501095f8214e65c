"""Embedded typed property graph for causal events.

Four node kinds (Event, Cause, Effect, Trigger), three edge kinds with a
fixed endpoint table:

    CAUSES:      Cause  -> Event
    RESULTS_IN:  Event  -> Effect
    HAS_TRIGGER: Event  -> Trigger

Storage is in-memory with optional JSON snapshot persistence. Edges have
set semantics (duplicates are idempotent) but preserve first-insertion
order, which fixes the order of collected neighbor texts. Concurrency
contract: many readers or one writer.
"""

from __future__ import annotations

import json
import threading
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from causeway.errors import (
    DimensionMismatchError,
    KindViolationError,
    MissingEndpointError,
    NotAnEventError,
    UnknownIdError,
)

if TYPE_CHECKING:
    from causeway.embedding import VectorIndex

EMBEDDING_DIM = 384

SNAPSHOT_FORMAT = "causeway-graph-snapshot"
SNAPSHOT_VERSION = 1


class NodeKind(str, Enum):
    EVENT = "Event"
    CAUSE = "Cause"
    EFFECT = "Effect"
    TRIGGER = "Trigger"


class EdgeKind(str, Enum):
    CAUSES = "CAUSES"
    RESULTS_IN = "RESULTS_IN"
    HAS_TRIGGER = "HAS_TRIGGER"


# (source kind, destination kind) allowed per edge kind
EDGE_ENDPOINTS: dict[EdgeKind, tuple[NodeKind, NodeKind]] = {
    EdgeKind.CAUSES: (NodeKind.CAUSE, NodeKind.EVENT),
    EdgeKind.RESULTS_IN: (NodeKind.EVENT, NodeKind.EFFECT),
    EdgeKind.HAS_TRIGGER: (NodeKind.EVENT, NodeKind.TRIGGER),
}


def check_embedding(vector) -> np.ndarray:
    """Coerce to a float64 array and enforce dimension and finiteness."""
    arr = np.asarray(vector, dtype=np.float64)
    if arr.shape != (EMBEDDING_DIM,):
        raise DimensionMismatchError(
            f"embedding must have shape ({EMBEDDING_DIM},), got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatchError("embedding entries must be finite")
    return arr


@dataclass(eq=False)
class Node:
    id: str
    kind: NodeKind
    text: str | None = None
    embedding: np.ndarray | None = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, Node):
            return NotImplemented
        if (self.id, self.kind, self.text) != (other.id, other.kind, other.text):
            return False
        if self.embedding is None or other.embedding is None:
            return self.embedding is None and other.embedding is None
        return bool(np.array_equal(self.embedding, other.embedding))


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    kind: EdgeKind


@dataclass
class StoreStats:
    node_counts: dict[NodeKind, int]
    edge_counts: dict[EdgeKind, int]
    embedded_counts: dict[NodeKind, int]

    @property
    def total_nodes(self) -> int:
        return sum(self.node_counts.values())

    @property
    def total_edges(self) -> int:
        return sum(self.edge_counts.values())

    @property
    def total_embedded(self) -> int:
        return sum(self.embedded_counts.values())

    def as_dict(self) -> dict:
        return {
            "nodes": {k.value: v for k, v in self.node_counts.items()},
            "edges": {k.value: v for k, v in self.edge_counts.items()},
            "embedded": {k.value: v for k, v in self.embedded_counts.items()},
            "total_nodes": self.total_nodes,
            "total_edges": self.total_edges,
            "total_embedded": self.total_embedded,
        }


class _RWLock:
    """Many readers or one writer. Writers wait for readers to drain."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False

    @contextmanager
    def read(self):
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if self._readers == 0:
                    self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            while self._writer or self._readers:
                self._cond.wait()
            self._writer = True
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


class GraphStore:
    """In-memory causal property graph.

    Nodes are keyed by caller-assigned string ids (conventionally
    namespaced by kind, e.g. ``event:17``). Vector indexes live in
    ``self.indexes`` and are managed by the embedding module; the store
    itself never consults them.
    """

    def __init__(self):
        self._nodes: dict[str, Node] = {}
        self._edges: list[Edge] = []
        self._edge_set: set[Edge] = set()
        # adjacency: node id -> edge kind -> neighbor ids in insertion order
        self._out: dict[str, dict[EdgeKind, list[str]]] = {}
        self._in: dict[str, dict[EdgeKind, list[str]]] = {}
        self.indexes: dict[NodeKind, "VectorIndex"] = {}
        self.lock = _RWLock()

    # --- nodes ---

    def upsert_node(self, node: Node) -> str:
        embedding = None
        if node.embedding is not None:
            embedding = check_embedding(node.embedding)
        with self.lock.write():
            existing = self._nodes.get(node.id)
            if existing is not None:
                if existing.kind is not node.kind:
                    raise KindViolationError(
                        f"node {node.id!r} is {existing.kind.value}, "
                        f"cannot change to {node.kind.value}"
                    )
                existing.text = node.text
                existing.embedding = embedding
            else:
                self._nodes[node.id] = Node(node.id, node.kind, node.text, embedding)
        return node.id

    def get_node(self, node_id: str) -> Node:
        with self.lock.read():
            node = self._nodes.get(node_id)
        if node is None:
            raise UnknownIdError(f"no node with id {node_id!r}")
        return node

    def has_node(self, node_id: str) -> bool:
        with self.lock.read():
            return node_id in self._nodes

    def set_embedding(self, node_id: str, vector) -> None:
        """Set or clear (vector=None) one node's embedding."""
        self.set_embeddings([(node_id, vector)])

    def set_embeddings(self, pairs) -> None:
        """Set several embeddings under a single writer-lock acquisition."""
        checked = [
            (node_id, None if vec is None else check_embedding(vec))
            for node_id, vec in pairs
        ]
        with self.lock.write():
            for node_id, embedding in checked:
                node = self._nodes.get(node_id)
                if node is None:
                    raise UnknownIdError(f"no node with id {node_id!r}")
                node.embedding = embedding

    def nodes(self, kind: NodeKind | None = None) -> list[Node]:
        with self.lock.read():
            if kind is None:
                return list(self._nodes.values())
            return [n for n in self._nodes.values() if n.kind is kind]

    # --- edges ---

    def add_edge(self, edge: Edge) -> None:
        with self.lock.write():
            src = self._nodes.get(edge.src)
            dst = self._nodes.get(edge.dst)
            if src is None or dst is None:
                missing = edge.src if src is None else edge.dst
                raise MissingEndpointError(f"edge endpoint {missing!r} not in store")
            want_src, want_dst = EDGE_ENDPOINTS[edge.kind]
            if src.kind is not want_src or dst.kind is not want_dst:
                raise KindViolationError(
                    f"{edge.kind.value} requires {want_src.value}->{want_dst.value}, "
                    f"got {src.kind.value}->{dst.kind.value}"
                )
            if edge in self._edge_set:
                return
            self._edge_set.add(edge)
            self._edges.append(edge)
            self._out.setdefault(edge.src, {}).setdefault(edge.kind, []).append(edge.dst)
            self._in.setdefault(edge.dst, {}).setdefault(edge.kind, []).append(edge.src)

    def edges(self) -> list[Edge]:
        with self.lock.read():
            return list(self._edges)

    # --- neighbor primitives ---

    def _require_event(self, event_id: str) -> Node:
        node = self._nodes.get(event_id)
        if node is None:
            raise UnknownIdError(f"no node with id {event_id!r}")
        if node.kind is not NodeKind.EVENT:
            raise NotAnEventError(f"{event_id!r} is a {node.kind.value}, not an Event")
        return node

    def neighbor_counts(self, event_id: str) -> tuple[int, int, int]:
        """(cause, effect, trigger) edge counts for one event."""
        with self.lock.read():
            self._require_event(event_id)
            n_cause = len(self._in.get(event_id, {}).get(EdgeKind.CAUSES, ()))
            out = self._out.get(event_id, {})
            n_effect = len(out.get(EdgeKind.RESULTS_IN, ()))
            n_trigger = len(out.get(EdgeKind.HAS_TRIGGER, ()))
        return n_cause, n_effect, n_trigger

    def collect_texts(self, event_id: str) -> tuple[list[str], list[str], list[str]]:
        """(cause, effect, trigger) neighbor texts in edge-insertion order."""
        with self.lock.read():
            self._require_event(event_id)
            causes = self._in.get(event_id, {}).get(EdgeKind.CAUSES, [])
            out = self._out.get(event_id, {})
            effects = out.get(EdgeKind.RESULTS_IN, [])
            triggers = out.get(EdgeKind.HAS_TRIGGER, [])

            def texts(ids: list[str]) -> list[str]:
                return [self._nodes[i].text or "" for i in ids]

            return texts(causes), texts(effects), texts(triggers)

    # --- reporting ---

    def stats(self) -> StoreStats:
        with self.lock.read():
            node_counts = {k: 0 for k in NodeKind}
            embedded_counts = {k: 0 for k in NodeKind}
            for node in self._nodes.values():
                node_counts[node.kind] += 1
                if node.embedding is not None:
                    embedded_counts[node.kind] += 1
            edge_counts = {k: 0 for k in EdgeKind}
            for edge in self._edges:
                edge_counts[edge.kind] += 1
        return StoreStats(node_counts, edge_counts, embedded_counts)

    def events_with_embeddings(self) -> Iterator[Node]:
        """Events with both an embedding and a text, in insertion order."""
        with self.lock.read():
            snapshot = list(self._nodes.values())
        for node in snapshot:
            if (
                node.kind is NodeKind.EVENT
                and node.embedding is not None
                and node.text is not None
            ):
                yield node

    # --- snapshot persistence ---

    def save(self, path: str | Path) -> None:
        payload = {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "embedding_dim": EMBEDDING_DIM,
            "nodes": [
                {
                    "id": n.id,
                    "kind": n.kind.value,
                    "text": n.text,
                    "embedding": None if n.embedding is None else n.embedding.tolist(),
                }
                for n in self.nodes()
            ],
            "edges": [
                {"src": e.src, "dst": e.dst, "kind": e.kind.value}
                for e in self.edges()
            ],
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "GraphStore":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != SNAPSHOT_FORMAT:
            raise ValueError(f"{path}: not a {SNAPSHOT_FORMAT} file")
        if payload.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"{path}: unsupported snapshot version")
        store = cls()
        for rec in payload["nodes"]:
            store.upsert_node(
                Node(
                    id=rec["id"],
                    kind=NodeKind(rec["kind"]),
                    text=rec["text"],
                    embedding=rec["embedding"],
                )
            )
        for rec in payload["edges"]:
            store.add_edge(Edge(rec["src"], rec["dst"], EdgeKind(rec["kind"])))
        return store
