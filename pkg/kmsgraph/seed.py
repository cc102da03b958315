from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from kmsgraph.models import Graph
from kmsgraph.services.graph_io import parse_graph

logger = logging.getLogger(__name__)

DEMO_GRAPHS = {
    "chains": """# four chains feeding a 2-cycle; two chains carry a second critical component
w1 w1 2
w1 u1
u1 u1 2
u1 v1
w2 w2 2
w2 u2
u2 u2
u2 v1
w3 w3 2
w3 u3
u3 u3
u3 v2
w4 w4 2
w4 u4
u4 u4 2
u4 v2
v1 v2
v2 v1
""",
    "subcritical": """# two critical loops fed by a subcritical 2-cycle
v v 2
w1 w1 3
w2 w2 3
u1 u2 2
u2 u1
u1 w1
u2 w2
w1 v
w2 v
""",
    "loops": """# single vertex with two loops
a a 2
""",
}

DEFAULT_DENSITY = 0.25


def demo_graph(name: str) -> Graph:
    return parse_graph(DEMO_GRAPHS[name])


def random_graph(
    rng: np.random.Generator,
    max_vertices: int = 10,
    max_multiplicity: int = 3,
    density: float = DEFAULT_DENSITY,
) -> Graph:
    n = int(rng.integers(1, max_vertices + 1))
    mask = rng.random((n, n)) < density
    counts = rng.integers(1, max_multiplicity + 1, size=(n, n))
    vertices = [f"v{i:02d}" for i in range(n)]
    return Graph.from_matrix(vertices, np.where(mask, counts, 0))


def run_seed(directory: str | Path = "data") -> list[Path]:
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for name in sorted(DEMO_GRAPHS):
        path = target / f"{name}.edges"
        path.write_text(DEMO_GRAPHS[name], encoding="utf-8")
        written.append(path)
        logger.info("wrote %s (%d edges)", path, demo_graph(name).edge_count)
    return written


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    for path in run_seed():
        print(path)
