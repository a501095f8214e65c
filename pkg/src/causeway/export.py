"""GraphViz DOT and Cypher text exports.

DOT output is one node or edge statement per line so it stays trivially
machine-countable. The Cypher export emits CREATE statements mirroring the
three relationship types for loading into an external graph database.
"""

from __future__ import annotations

from collections.abc import Iterable

from causeway.errors import NotAnEventError
from causeway.store import Edge, GraphStore, Node, NodeKind

_NODE_SHAPES = {
    NodeKind.EVENT: "box",
    NodeKind.CAUSE: "ellipse",
    NodeKind.EFFECT: "ellipse",
    NodeKind.TRIGGER: "diamond",
}


def _dot_escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"')


def render_dot(
    nodes: Iterable[Node],
    edges: Iterable[Edge],
    name: str = "causal",
    comment: str | None = None,
) -> str:
    lines = [f"digraph {name} {{"]
    if comment:
        lines.append(f"  // {comment}")
    lines.append("  rankdir=LR;")
    for node in nodes:
        label = f"{node.kind.value}: {node.text or ''}"
        lines.append(
            f'  "{_dot_escape(node.id)}" '
            f'[label="{_dot_escape(label)}", shape={_NODE_SHAPES[node.kind]}];'
        )
    for edge in edges:
        lines.append(
            f'  "{_dot_escape(edge.src)}" -> "{_dot_escape(edge.dst)}" '
            f'[label="{edge.kind.value}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def event_subgraph_dot(store: GraphStore, event_id: str) -> str:
    """DOT for one event and its direct causal neighborhood."""
    event = store.get_node(event_id)
    if event.kind is not NodeKind.EVENT:
        raise NotAnEventError(f"{event_id!r} is a {event.kind.value}, not an Event")
    keep = {event_id}
    edges = []
    for edge in store.edges():
        if edge.src == event_id or edge.dst == event_id:
            edges.append(edge)
            keep.add(edge.src)
            keep.add(edge.dst)
    nodes = [store.get_node(node_id) for node_id in sorted(keep)]
    return render_dot(nodes, edges, name="event_subgraph")


def store_to_dot(store: GraphStore) -> str:
    return render_dot(store.nodes(), store.edges())


def _cypher_escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"')


def store_to_cypher(store: GraphStore) -> str:
    """CREATE statements for every node and relationship."""
    lines = ["// causeway graph export"]
    for node in store.nodes():
        props = [f'id: "{_cypher_escape(node.id)}"']
        if node.text is not None:
            props.append(f'text: "{_cypher_escape(node.text)}"')
        lines.append(f"CREATE (:{node.kind.value} {{{', '.join(props)}}});")
    for edge in store.edges():
        lines.append(
            f'MATCH (a {{id: "{_cypher_escape(edge.src)}"}}), '
            f'(b {{id: "{_cypher_escape(edge.dst)}"}}) '
            f"CREATE (a)-[:{edge.kind.value}]->(b);"
        )
    return "\n".join(lines) + "\n"
