from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import networkx as nx
import numpy as np

from kmsgraph.errors import GraphInputError
from kmsgraph.models import Graph

logger = logging.getLogger(__name__)

Component = tuple[str, ...]


@dataclass(frozen=True)
class SccDecomposition:
    components: tuple[Component, ...]
    component_of: Mapping[str, Component] = field(repr=False)

    def component(self, vertex: str) -> Component:
        try:
            return self.component_of[vertex]
        except KeyError:
            raise GraphInputError(f"unknown vertex '{vertex}'") from None

    def index(self, component: Iterable[str]) -> int:
        key = tuple(sorted(component))
        try:
            return self.components.index(key)
        except ValueError:
            raise GraphInputError(f"{{{','.join(key)}}} is not a strongly connected component") from None


@dataclass(frozen=True, eq=False)
class CondensationGraph:
    """Components that reach ``base`` with the edge counts between them.

    ``multiplicity[(i, j)]`` is the number of edges from ``nodes[i]`` into ``nodes[j]``.
    """

    base: Component
    nodes: tuple[Component, ...]
    multiplicity: Mapping[tuple[int, int], int]

    @cached_property
    def digraph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(len(self.nodes)))
        for (source, target), count in self.multiplicity.items():
            graph.add_edge(source, target, multiplicity=count)
        return graph

    @property
    def base_index(self) -> int:
        return self.nodes.index(self.base)

    def index(self, component: Component) -> int:
        try:
            return self.nodes.index(component)
        except ValueError:
            raise GraphInputError(f"{{{','.join(component)}}} does not reach the base component") from None

    def successors(self, node: int) -> list[int]:
        return sorted(self.digraph.successors(node))

    def topological_order(self) -> list[int]:
        return list(nx.lexicographical_topological_sort(self.digraph))

    def paths_from(self, node: int) -> list[tuple[int, ...]]:
        if node == self.base_index:
            return [(node,)]
        return [tuple(path) for path in nx.all_simple_paths(self.digraph, node, self.base_index)]


@lru_cache(maxsize=256)
def scc(g: Graph) -> SccDecomposition:
    if len(g) == 0:
        raise GraphInputError("empty graph")
    components = sorted(tuple(sorted(members)) for members in nx.strongly_connected_components(g.digraph))
    component_of = {vertex: component for component in components for vertex in component}
    return SccDecomposition(components=tuple(components), component_of=component_of)


def restriction(g: Graph, vertex_set: Iterable[str]) -> Graph:
    members = set(vertex_set)
    positions = g.indices(members)
    vertices = tuple(g.vertices[i] for i in positions)
    return Graph(vertices, g.adjacency[np.ix_(positions, positions)])


def ancestors(g: Graph, targets: Iterable[str]) -> frozenset[str]:
    found: set[str] = set()
    for target in targets:
        g.index(target)
        found.add(target)
        found.update(nx.ancestors(g.digraph, target))
    return frozenset(found)


def descendants(g: Graph, sources: Iterable[str]) -> frozenset[str]:
    found: set[str] = set()
    for source in sources:
        g.index(source)
        found.add(source)
        found.update(nx.descendants(g.digraph, source))
    return frozenset(found)


def condensation(g: Graph, base: Iterable[str]) -> CondensationGraph:
    decomposition = scc(g)
    base_component = decomposition.components[decomposition.index(base)]
    upstream = ancestors(g, base_component)
    nodes = tuple(component for component in decomposition.components if component[0] in upstream)
    blocks = [g.indices(component) for component in nodes]
    multiplicity: dict[tuple[int, int], int] = {}
    for i, rows in enumerate(blocks):
        for j, cols in enumerate(blocks):
            if i == j:
                continue
            count = int(g.adjacency[np.ix_(rows, cols)].sum())
            if count:
                multiplicity[(i, j)] = count
    result = CondensationGraph(base=base_component, nodes=nodes, multiplicity=multiplicity)
    if not nx.is_directed_acyclic_graph(result.digraph):
        raise GraphInputError("condensation graph has a cycle")
    logger.debug("condensation over %s: %d nodes, %d edges", base_component, len(nodes), len(multiplicity))
    return result
