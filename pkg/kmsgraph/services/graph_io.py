from __future__ import annotations

import logging
from pathlib import Path

from kmsgraph.errors import GraphInputError
from kmsgraph.models import Graph

logger = logging.getLogger(__name__)

COMMENT_PREFIX = "#"


def _parse_multiplicity(token: str, line_number: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise GraphInputError(f"line {line_number}: multiplicity '{token}' is not an integer") from None
    if value < 1:
        raise GraphInputError(f"line {line_number}: multiplicity must be >= 1")
    return value


def parse_graph(text: str) -> Graph:
    """Parse an edge list: one ``source target [multiplicity]`` per line, ``#`` comments."""
    edges: list[tuple[str, str, int]] = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(COMMENT_PREFIX):
            continue
        tokens = line.split()
        if len(tokens) not in (2, 3):
            raise GraphInputError(f"line {line_number}: expected 'source target [multiplicity]'")
        multiplicity = _parse_multiplicity(tokens[2], line_number) if len(tokens) == 3 else 1
        edges.append((tokens[0], tokens[1], multiplicity))
    if not edges:
        raise GraphInputError("empty graph")
    graph = Graph.from_edges(edges)
    logger.debug("parsed graph with %d vertices and %d edges", len(graph), graph.edge_count)
    return graph


def serialize_graph(g: Graph) -> str:
    lines = [
        f"{source} {target}" if count == 1 else f"{source} {target} {count}"
        for source, target, count in g.edges()
    ]
    return "\n".join(lines) + "\n"


def load_graph(path: str | Path) -> Graph:
    location = Path(path)
    try:
        text = location.read_text(encoding="utf-8")
    except OSError as exc:
        raise GraphInputError(f"cannot read graph file '{location}': {exc.strerror}") from exc
    return parse_graph(text)
