from __future__ import annotations

import sys
from collections.abc import Iterable
from dataclasses import dataclass
from functools import cached_property

import networkx as nx
import numpy as np

from kmsgraph.errors import GraphInputError

if sys.version_info >= (3, 11):
    from enum import StrEnum
else:  # pragma: no cover - backport of enum.StrEnum for Python 3.10
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__


class ReportFormat(StrEnum):
    JSON = "json"
    TABLE = "table"


class ReportCommand(StrEnum):
    ANALYZE = "analyze"
    STATES = "states"
    DECOMPOSE = "decompose"
    ORACLE = "oracle"


@dataclass(frozen=True, eq=False)
class Graph:
    """Finite directed multigraph stored as a nonnegative integer adjacency matrix.

    ``adjacency[s, t]`` counts the edges from ``vertices[s]`` to ``vertices[t]``.
    Vertices are kept in sorted order so that matrix indices are deterministic.
    """

    vertices: tuple[str, ...]
    adjacency: np.ndarray

    def __post_init__(self) -> None:
        vertices = tuple(str(vertex) for vertex in self.vertices)
        if len(set(vertices)) != len(vertices):
            raise GraphInputError("duplicate vertex identifiers")
        if list(vertices) != sorted(vertices):
            raise GraphInputError("vertices must be listed in sorted order")
        matrix = np.asarray(self.adjacency)
        n = len(vertices)
        if matrix.size == 0 and n == 0:
            matrix = np.zeros((0, 0), dtype=np.int64)
        if matrix.shape != (n, n):
            raise GraphInputError(f"adjacency matrix must be {n}x{n}, got {matrix.shape}")
        if not np.all(np.equal(np.mod(matrix, 1), 0)):
            raise GraphInputError("edge multiplicities must be integers")
        if np.any(matrix < 0):
            raise GraphInputError("edge multiplicities must be nonnegative")
        matrix = matrix.astype(np.int64, copy=True)
        matrix.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "adjacency", matrix)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str, int]], vertices: Iterable[str] = ()) -> Graph:
        edge_list = [(str(source), str(target), int(count)) for source, target, count in edges]
        names = set(str(vertex) for vertex in vertices)
        for source, target, _ in edge_list:
            names.update((source, target))
        ordered = tuple(sorted(names))
        index = {vertex: i for i, vertex in enumerate(ordered)}
        matrix = np.zeros((len(ordered), len(ordered)), dtype=np.int64)
        for source, target, count in edge_list:
            if count < 1:
                raise GraphInputError(f"multiplicity must be >= 1 for edge {source}->{target}")
            matrix[index[source], index[target]] += count
        return cls(ordered, matrix)

    @classmethod
    def from_matrix(cls, vertices: Iterable[str], matrix: np.ndarray) -> Graph:
        names = [str(vertex) for vertex in vertices]
        matrix = np.asarray(matrix)
        order = sorted(range(len(names)), key=names.__getitem__)
        if matrix.shape != (len(names), len(names)):
            raise GraphInputError(f"adjacency matrix must be {len(names)}x{len(names)}, got {matrix.shape}")
        return cls(tuple(names[i] for i in order), matrix[np.ix_(order, order)])

    def __len__(self) -> int:
        return len(self.vertices)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.vertices == other.vertices and np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self) -> int:
        return hash((self.vertices, self.adjacency.tobytes()))

    @cached_property
    def _index(self) -> dict[str, int]:
        return {vertex: i for i, vertex in enumerate(self.vertices)}

    def index(self, vertex: str) -> int:
        try:
            return self._index[vertex]
        except KeyError:
            raise GraphInputError(f"unknown vertex '{vertex}'") from None

    def indices(self, vertices: Iterable[str]) -> list[int]:
        return sorted(self.index(vertex) for vertex in vertices)

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.sum())

    def edges(self) -> list[tuple[str, str, int]]:
        sources, targets = np.nonzero(self.adjacency)
        return [
            (self.vertices[s], self.vertices[t], int(self.adjacency[s, t]))
            for s, t in zip(sources.tolist(), targets.tolist())
        ]

    @cached_property
    def digraph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.vertices)
        for source, target, count in self.edges():
            graph.add_edge(source, target, multiplicity=count)
        return graph
