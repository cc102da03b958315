from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from functools import lru_cache

import networkx as nx
import numpy as np
from scipy import linalg

from kmsgraph.config import DEFAULT_TOLERANCES, Tolerances
from kmsgraph.errors import DivergenceError, GraphInputError, HarmonicError, TemperatureError
from kmsgraph.models import Graph
from kmsgraph.services.genfun import same_location
from kmsgraph.services.graph_core import Component, ancestors, descendants, restriction, scc
from kmsgraph.services.spectral import POLE_MARGIN, perron_data, spectral_radius

logger = logging.getLogger(__name__)

HARMONIC_REL_TOL = 1e-9
VANISHING_REL_TOL = 1e-6
NEGATIVE_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class HarmonicVector:
    beta: float
    vertices: tuple[str, ...]
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class StateVector:
    """A KMS_beta state described by its values on vertex projections.

    ``p[i]`` is the state on the projection of ``vertices[i]``; ``delta`` is
    the gap ``p - e^{-beta} A p``. States supported at infinity have ``delta == 0``.
    """

    beta: float
    vertices: tuple[str, ...]
    p: np.ndarray
    delta: np.ndarray
    supported_at_infinity: bool

    def value(self, vertex: str) -> float:
        return float(self.p[self.vertices.index(vertex)])

    def as_dict(self) -> dict[str, float]:
        return {vertex: float(value) for vertex, value in zip(self.vertices, self.p)}


@dataclass(frozen=True)
class ComponentTemperature:
    component: Component
    rho: float

    @property
    def beta(self) -> float:
        return math.log(self.rho)


@dataclass(frozen=True)
class HarmonicCheck:
    ok: bool
    residual: float
    is_zero: bool = False
    violation: str | None = None

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class ExtremalStateGroup:
    beta: float
    states: dict[Component, StateVector]


@lru_cache(maxsize=256)
def component_radii(g: Graph) -> dict[Component, float]:
    adjacency = g.adjacency.astype(float)
    radii: dict[Component, float] = {}
    for component in scc(g).components:
        positions = g.indices(component)
        radii[component] = spectral_radius(adjacency[np.ix_(positions, positions)])
    return radii


def column_path_sums(
    g: Graph, target: str, x: float, within: Iterable[str] | None = None
) -> tuple[tuple[str, ...], np.ndarray]:
    """Weighted path counts ``sum_n x^n (A^n)[w, target]`` for every ``w`` in ``within``.

    ``within`` must be closed under the components of ``g`` and contain ``target``;
    it defaults to the ancestors of ``target``. Blocks are solved sink first.
    """
    members = frozenset(ancestors(g, [target]) if within is None else within)
    if target not in members:
        raise GraphInputError(f"'{target}' is outside the summation set")
    vertices = tuple(sorted(members))
    position = {vertex: i for i, vertex in enumerate(vertices)}
    indices = g.indices(vertices)
    adjacency = g.adjacency[np.ix_(indices, indices)].astype(float)
    radii = component_radii(g)
    dag = nx.condensation(g.digraph.subgraph(members))
    column = np.zeros(len(vertices))
    for node in reversed(list(nx.topological_sort(dag))):
        component = tuple(sorted(dag.nodes[node]["members"]))
        if x * radii[component] >= 1.0 - POLE_MARGIN:
            raise DivergenceError("series divergent")
        block = [position[vertex] for vertex in component]
        rhs = x * (adjacency[block, :] @ column)
        if target in component:
            rhs[component.index(target)] += 1.0
        system = np.eye(len(block)) - x * adjacency[np.ix_(block, block)]
        try:
            column[block] = linalg.solve(system, rhs)
        except linalg.LinAlgError as exc:
            raise DivergenceError(f"path-sum system for {component} is singular: {exc}") from exc
    return vertices, np.clip(column, 0.0, None)


def beta_v(g: Graph, v: str, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    radii = component_radii(g)
    upstream = ancestors(g, [v])
    rho = max(radius for component, radius in radii.items() if component[0] in upstream)
    if rho == 0.0:
        return -math.inf
    if same_location(rho, 1.0, tolerances.critical):
        return 0.0
    return math.log(rho)


def Z(g: Graph, w: str, v: str, beta: float) -> float:
    upstream = ancestors(g, [v])
    g.index(w)
    if w not in upstream:
        return 0.0
    within = upstream & descendants(g, [w])
    vertices, column = column_path_sums(g, v, math.exp(-beta), within)
    return float(column[vertices.index(w)])


def Z_v(g: Graph, v: str, beta: float) -> float:
    if beta <= beta_v(g, v):
        raise DivergenceError("series divergent")
    _, column = column_path_sums(g, v, math.exp(-beta))
    return float(column.sum())


def _require_component(g: Graph, component: Iterable[str]) -> Component:
    decomposition = scc(g)
    return decomposition.components[decomposition.index(component)]


def Z_vC(g: Graph, component: Iterable[str], v: str, beta: float) -> float:
    members = _require_component(g, component)
    return sum(Z(g, w, v, beta) for w in members)


def Z_wvC(g: Graph, w: str, component: Iterable[str], v: str, beta: float) -> float:
    members = _require_component(g, component)
    return sum(Z(g, w, middle, beta) * Z(g, middle, v, beta) for middle in members)


def type_I_state(g: Graph, v: str, beta: float) -> StateVector:
    if not beta > beta_v(g, v):
        raise TemperatureError(f"below critical temperature: beta must exceed beta_v for '{v}'")
    vertices, column = column_path_sums(g, v, math.exp(-beta))
    total = float(column.sum())
    p = np.zeros(len(g))
    p[g.indices(vertices)] = column / total
    delta = np.zeros(len(g))
    delta[g.index(v)] = 1.0 / total
    return StateVector(beta=beta, vertices=g.vertices, p=p, delta=delta, supported_at_infinity=False)


def kms_residual(g: Graph, state: StateVector) -> float:
    implied = state.delta + math.exp(-state.beta) * (g.adjacency.astype(float) @ state.p)
    return float(np.abs(state.p - implied).max())


@lru_cache(maxsize=256)
def minimal_components(g: Graph, tolerances: Tolerances = DEFAULT_TOLERANCES) -> tuple[ComponentTemperature, ...]:
    radii = component_radii(g)
    decomposition = scc(g)
    result: list[ComponentTemperature] = []
    for component in decomposition.components:
        rho = radii[component]
        if rho <= 1.0 or same_location(rho, 1.0, tolerances.critical):
            continue
        upstream = ancestors(g, component) - set(component)
        feeders = {decomposition.component(vertex) for vertex in upstream}
        if all(
            radii[feeder] < rho and not same_location(radii[feeder], rho, tolerances.critical)
            for feeder in feeders
        ):
            result.append(ComponentTemperature(component=component, rho=rho))
    return tuple(result)


def crit_v(g: Graph, v: str, tolerances: Tolerances = DEFAULT_TOLERANCES) -> tuple[Component, ...]:
    critical_beta = beta_v(g, v, tolerances)
    if not critical_beta > 0.0:
        raise TemperatureError(f"critical inverse temperature of '{v}' is not positive")
    upstream = ancestors(g, [v])
    scale = math.exp(critical_beta)
    return tuple(
        entry.component
        for entry in minimal_components(g, tolerances)
        if entry.component[0] in upstream and same_location(entry.rho, scale, tolerances.critical)
    )


def _harmonic_residual(adjacency: np.ndarray, values: np.ndarray, beta: float) -> float:
    scale = math.exp(beta)
    size = float(np.abs(values).max()) if values.size else 0.0
    if size == 0.0:
        return 0.0
    return float(np.abs(adjacency @ values - scale * values).max()) / (scale * size)


def harmonic_extend(
    g: Graph,
    component: Iterable[str],
    h0: np.ndarray,
    beta: float,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> HarmonicVector:
    members = tuple(sorted(set(component)))
    positions = g.indices(members)
    seed = np.asarray(h0, dtype=float)
    if seed.shape != (len(members),):
        raise HarmonicError(f"h0 must have {len(members)} entries")
    if np.any(seed < -NEGATIVE_SLACK) or not np.any(seed > 0.0):
        raise HarmonicError("h0 must be nonnegative and nonzero")
    adjacency = g.adjacency.astype(float)
    scale = math.exp(beta)
    if _harmonic_residual(adjacency[np.ix_(positions, positions)], seed, beta) > HARMONIC_REL_TOL:
        raise HarmonicError("h0 is not beta-harmonic on the restricted graph")

    values = np.zeros(len(g))
    values[positions] = seed
    upstream = g.indices(ancestors(g, members) - set(members))
    if upstream:
        block = adjacency[np.ix_(upstream, upstream)]
        rho = spectral_radius(block)
        if rho >= scale or same_location(rho, scale, tolerances.critical):
            raise HarmonicError("e^beta I - A_D is singular or not inverse-positive")
        coupling = adjacency[np.ix_(upstream, positions)] @ seed
        try:
            solution = linalg.solve(scale * np.eye(len(upstream)) - block, coupling)
        except linalg.LinAlgError as exc:
            raise HarmonicError(f"e^beta I - A_D is singular: {exc}") from exc
        values[upstream] = np.clip(solution, 0.0, None)

    residual = _harmonic_residual(adjacency, values, beta)
    if residual > HARMONIC_REL_TOL:
        raise HarmonicError(f"extension is not harmonic (relative residual {residual:.3g})")
    return HarmonicVector(beta=beta, vertices=g.vertices, values=values)


def is_harmonic(
    g: Graph,
    h: HarmonicVector | StateVector,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    rel_tol: float = HARMONIC_REL_TOL,
) -> HarmonicCheck:
    values = np.asarray(h.values if isinstance(h, HarmonicVector) else h.p, dtype=float)
    if values.shape != (len(g),):
        raise HarmonicError(f"vector must have {len(g)} entries")
    size = float(np.abs(values).max()) if values.size else 0.0
    if size == 0.0:
        return HarmonicCheck(ok=True, residual=0.0, is_zero=True, violation="zero vector")
    if np.any(values < -NEGATIVE_SLACK * size):
        return HarmonicCheck(ok=False, residual=math.inf, violation="negative entries")
    residual = _harmonic_residual(g.adjacency.astype(float), values, h.beta)
    if residual > rel_tol:
        return HarmonicCheck(ok=False, residual=residual, violation="A h differs from e^beta h")

    scale = math.exp(h.beta)
    radii = component_radii(g)
    minimal = {entry.component for entry in minimal_components(g, tolerances)}
    for component, rho in radii.items():
        mass = float(np.abs(values[g.indices(component)]).max())
        if mass <= VANISHING_REL_TOL * size:
            continue
        label = "{" + ",".join(component) + "}"
        if same_location(rho, scale, tolerances.critical):
            if component not in minimal:
                return HarmonicCheck(
                    ok=False, residual=residual, violation=f"nonzero on critical non-minimal component {label}"
                )
        elif rho > scale:
            return HarmonicCheck(ok=False, residual=residual, violation=f"nonzero on component {label} with rho > e^beta")
    return HarmonicCheck(ok=True, residual=residual)


def psi_C(g: Graph, component: Iterable[str], tolerances: Tolerances = DEFAULT_TOLERANCES) -> StateVector:
    members = tuple(sorted(set(component)))
    entry = next((item for item in minimal_components(g, tolerances) if item.component == members), None)
    if entry is None:
        raise HarmonicError(f"{{{','.join(members)}}} is not a positive minimal component")
    perron = perron_data(restriction(g, members).adjacency.astype(float))
    harmonic = harmonic_extend(g, members, perron.left, entry.beta, tolerances)
    p = harmonic.values / harmonic.values.sum()
    return StateVector(
        beta=entry.beta,
        vertices=g.vertices,
        p=p,
        delta=np.zeros(len(g)),
        supported_at_infinity=True,
    )


def extremal_states(g: Graph, tolerances: Tolerances = DEFAULT_TOLERANCES) -> list[ExtremalStateGroup]:
    groups: list[ExtremalStateGroup] = []
    for entry in sorted(minimal_components(g, tolerances), key=lambda item: (item.rho, item.component)):
        state = psi_C(g, entry.component, tolerances)
        if groups and same_location(math.exp(groups[-1].beta), entry.rho, tolerances.critical):
            groups[-1].states[entry.component] = state
        else:
            groups.append(ExtremalStateGroup(beta=entry.beta, states={entry.component: state}))
    return groups


def type_I_vertices(g: Graph, beta: float, tolerances: Tolerances = DEFAULT_TOLERANCES) -> tuple[str, ...]:
    return tuple(vertex for vertex in g.vertices if beta > beta_v(g, vertex, tolerances))


def harmonic_cone_dimension(g: Graph, beta: float, tolerances: Tolerances = DEFAULT_TOLERANCES) -> int:
    scale = math.exp(beta)
    return sum(1 for entry in minimal_components(g, tolerances) if same_location(entry.rho, scale, tolerances.critical))
