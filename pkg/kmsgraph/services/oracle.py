from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from kmsgraph.errors import GraphInputError, TemperatureError
from kmsgraph.models import Graph
from kmsgraph.services import kms
from kmsgraph.services.graph_core import ancestors, condensation, descendants, restriction, scc
from kmsgraph.services.spectral import resolvent, spectral_radius

logger = logging.getLogger(__name__)

ENUMERATION_VERTEX_LIMIT = 12
ENUMERATION_LENGTH_LIMIT = 20
POLE_ORDER_POINTS = 13


@dataclass(frozen=True)
class TruncationResult:
    value: float
    n_terms: int
    tail_bound: float

    @property
    def upper(self) -> float:
        return self.value + self.tail_bound


@dataclass(frozen=True, eq=False)
class PathHistogram:
    """Exact path counts from ``w`` to ``v`` by length and by component sequence."""

    w: str
    v: str
    max_len: int
    counts: tuple[int, ...]
    by_sequence: dict[tuple[str, ...], tuple[int, ...]]
    matches_matrix_powers: bool

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"length": range(self.max_len + 1), "total": list(self.counts)})
        for sequence, counts in sorted(self.by_sequence.items()):
            frame[" > ".join(sequence)] = list(counts)
        return frame.set_index("length")


@dataclass(frozen=True)
class FactorizationCheck:
    w: str
    v: str
    beta: float
    product_sum: float
    direct: float
    per_path: dict[tuple[str, ...], float]

    @property
    def error(self) -> float:
        return abs(self.product_sum - self.direct) / max(abs(self.direct), 1.0)


@dataclass(frozen=True)
class PoleOrderMeasurement:
    vertex: str
    slope: float
    eps_min: float
    eps_max: float


def _component_label(component: tuple[str, ...]) -> str:
    return "{" + ",".join(component) + "}"


def truncated_Z(g: Graph, w: str, v: str, beta: float, n_terms: int) -> TruncationResult:
    if n_terms < 0:
        raise GraphInputError("truncation order must be nonnegative")
    upstream = ancestors(g, [v])
    g.index(w)
    if w not in upstream:
        return TruncationResult(value=0.0, n_terms=n_terms, tail_bound=0.0)
    region = restriction(g, upstream & descendants(g, [w]))
    adjacency = region.adjacency.astype(float)
    x = math.exp(-beta)
    source, target = region.index(w), region.index(v)

    row = np.zeros(len(region))
    row[source] = 1.0
    value = 0.0
    for _ in range(n_terms + 1):
        value += row[target]
        row = x * (row @ adjacency)

    rho = spectral_radius(adjacency)
    if x * rho >= 1.0:
        return TruncationResult(value=value, n_terms=n_terms, tail_bound=math.inf)
    # u = (I - yA)^{-1} 1 with x < y < 1/rho is a positive vector with A u <= u / y.
    y = 2.0 * x if rho == 0.0 else 0.5 * (x + 1.0 / rho)
    supervector = resolvent(adjacency, y) @ np.ones(len(region))
    tail = float(row @ supervector) / (supervector[target] * (1.0 - x / y))
    return TruncationResult(value=value, n_terms=n_terms, tail_bound=tail)


def enumerate_paths(g: Graph, w: str, v: str, max_len: int) -> PathHistogram:
    if len(g) > ENUMERATION_VERTEX_LIMIT or not 0 <= max_len <= ENUMERATION_LENGTH_LIMIT:
        raise GraphInputError(
            f"path enumeration is limited to {ENUMERATION_VERTEX_LIMIT} vertices "
            f"and lengths 0..{ENUMERATION_LENGTH_LIMIT}"
        )
    g.index(w)
    g.index(v)
    decomposition = scc(g)
    edges = g.edges()
    counts = [0] * (max_len + 1)
    by_sequence: dict[tuple[str, ...], list[int]] = {}
    # States are (current vertex, components visited so far) with exact integer weights.
    frontier: dict[tuple[str, tuple[tuple[str, ...], ...]], int] = {(w, (decomposition.component(w),)): 1}
    for length in range(max_len + 1):
        for (vertex, sequence), weight in frontier.items():
            if vertex == v:
                counts[length] += weight
                key = tuple(_component_label(component) for component in sequence)
                by_sequence.setdefault(key, [0] * (max_len + 1))[length] += weight
        if length == max_len:
            break
        following: dict[tuple[str, tuple[tuple[str, ...], ...]], int] = {}
        for (vertex, sequence), weight in frontier.items():
            for source, target, multiplicity in edges:
                if source != vertex:
                    continue
                component = decomposition.component(target)
                extended = sequence if component == sequence[-1] else sequence + (component,)
                state = (target, extended)
                following[state] = following.get(state, 0) + weight * multiplicity
        frontier = following

    matrix = np.array(g.adjacency.tolist(), dtype=object)
    power = np.identity(len(g), dtype=object)
    source, target = g.index(w), g.index(v)
    expected = []
    for _ in range(max_len + 1):
        expected.append(int(power[source, target]))
        power = power.dot(matrix)
    matches = expected == counts
    if not matches:
        logger.warning("path enumeration disagrees with matrix powers for %s -> %s", w, v)
    return PathHistogram(
        w=w,
        v=v,
        max_len=max_len,
        counts=tuple(counts),
        by_sequence={key: tuple(values) for key, values in by_sequence.items()},
        matches_matrix_powers=matches,
    )


def factorization_check(g: Graph, w: str, v: str, beta: float) -> FactorizationCheck:
    """Sum over condensation paths of products of per-component path sums and bridge edges."""
    g.index(w)
    direct = kms.Z(g, w, v, beta)
    decomposition = scc(g)
    if w not in ancestors(g, [v]):
        return FactorizationCheck(w=w, v=v, beta=beta, product_sum=0.0, direct=direct, per_path={})
    condensed = condensation(g, decomposition.component(v))
    x = math.exp(-beta)
    adjacency = g.adjacency.astype(float)
    start = condensed.index(decomposition.component(w))

    def internal(component: tuple[str, ...]) -> np.ndarray:
        local = restriction(g, component)
        return np.array([[kms.Z(local, a, b, beta) for b in component] for a in component])

    blocks = {component: internal(component) for component in condensed.nodes}
    per_path: dict[tuple[str, ...], float] = {}
    for path in condensed.paths_from(start):
        components = [condensed.nodes[node] for node in path]
        first = components[0]
        row = blocks[first][first.index(w)]
        for previous, current in zip(components, components[1:]):
            bridge = adjacency[np.ix_(g.indices(previous), g.indices(current))]
            row = x * (row @ bridge) @ blocks[current]
        per_path[tuple(_component_label(component) for component in components)] = float(
            row[components[-1].index(v)]
        )
    return FactorizationCheck(
        w=w, v=v, beta=beta, product_sum=sum(per_path.values()), direct=direct, per_path=per_path
    )


def measured_pole_order(
    g: Graph, v: str, eps_min: float = 1e-6, eps_max: float = 1e-3, points: int = POLE_ORDER_POINTS
) -> PoleOrderMeasurement:
    critical_beta = kms.beta_v(g, v)
    if not critical_beta > 0.0:
        raise TemperatureError(f"critical inverse temperature of '{v}' is not positive")
    eps = np.geomspace(eps_min, eps_max, points)
    values = np.array([kms.Z_v(g, v, critical_beta + step) for step in eps])
    slope = float(np.polyfit(-np.log(eps), np.log(values), 1)[0])
    return PoleOrderMeasurement(vertex=v, slope=slope, eps_min=eps_min, eps_max=eps_max)
