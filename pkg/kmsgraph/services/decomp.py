from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterator, Mapping
from concurrent.futures import ThreadPoolExecutor
from contextlib import closing
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy import linalg

from kmsgraph.config import DEFAULT_TOLERANCES, Tolerances, get_settings
from kmsgraph.errors import (
    DivergenceError,
    ExtrapolationError,
    GraphInputError,
    HarmonicError,
    KmsGraphError,
    SupportMismatchError,
    TemperatureError,
)
from kmsgraph.models import Graph
from kmsgraph.services.genfun import PoleClass, class_le, class_mul, class_sum, component_class, same_location
from kmsgraph.services.graph_core import Component, CondensationGraph, ancestors, condensation, scc
from kmsgraph.services.kms import (
    StateVector,
    beta_v,
    column_path_sums,
    component_radii,
    crit_v,
    minimal_components,
    psi_C,
)

logger = logging.getLogger(__name__)

RECONSTRUCTION_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class PathCriticalityAnalysis:
    """Critical-component counts along condensation paths into the base component.

    ``max_counts[C]`` is the largest number of critical components on a path
    from ``C`` to the base; ``max_count`` is the maximum over all components.
    """

    condensation: CondensationGraph
    critical: frozenset[Component]
    minimal_critical: frozenset[Component]
    max_counts: Mapping[Component, int]
    max_count: int
    support: frozenset[Component]


@dataclass(frozen=True)
class ExtrapolationDiagnostics:
    depth: int
    residual: float
    smallest_eps: float
    converged: bool
    delta_at_smallest_eps: float | None = None


@dataclass(frozen=True)
class DecompositionDiagnostics:
    extrapolation: ExtrapolationDiagnostics
    coefficient_sum: float
    reconstruction_error: float
    distribution_error: float
    limit_coefficient_deviation: float | None
    tolerances: Tolerances = field(default_factory=Tolerances)


@dataclass(frozen=True, eq=False)
class DecompositionReport:
    vertex: str
    beta_v: float
    coefficients: dict[Component, float]
    phi: StateVector
    combinatorial_support: frozenset[Component]
    analysis: PathCriticalityAnalysis
    coefficient_vectors: dict[Component, np.ndarray]
    diagnostics: DecompositionDiagnostics

    @property
    def numeric_support(self) -> frozenset[Component]:
        threshold = self.diagnostics.tolerances.support_threshold
        return frozenset(component for component, value in self.coefficients.items() if value > threshold)


def analyze_paths(
    condensed: CondensationGraph,
    critical_beta: float,
    rho_map: Mapping[Component, float],
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> PathCriticalityAnalysis:
    if not nx.is_directed_acyclic_graph(condensed.digraph):
        raise GraphInputError("condensation graph has a cycle")
    scale = math.exp(critical_beta)
    critical_nodes = {
        node for node, component in enumerate(condensed.nodes)
        if same_location(rho_map[component], scale, tolerances.critical)
    }
    counts: dict[int, int] = {}
    for node in reversed(condensed.topological_order()):
        downstream = max((counts[successor] for successor in condensed.successors(node)), default=0)
        counts[node] = int(node in critical_nodes) + downstream
    max_count = max(counts.values())
    minimal_nodes = {
        node for node in critical_nodes
        if not critical_nodes.intersection(nx.ancestors(condensed.digraph, node))
    }
    max_counts = {condensed.nodes[node]: count for node, count in counts.items()}
    logger.debug(
        "critical components over %s: %s (max count %d)",
        condensed.base,
        sorted(condensed.nodes[node] for node in critical_nodes),
        max_count,
    )
    return PathCriticalityAnalysis(
        condensation=condensed,
        critical=frozenset(condensed.nodes[node] for node in critical_nodes),
        minimal_critical=frozenset(condensed.nodes[node] for node in minimal_nodes),
        max_counts=max_counts,
        max_count=max_count,
        support=frozenset(condensed.nodes[node] for node in minimal_nodes if counts[node] == max_count),
    )


def _analysis_for(g: Graph, v: str, tolerances: Tolerances) -> tuple[float, PathCriticalityAnalysis]:
    critical_beta = beta_v(g, v, tolerances)
    if not critical_beta > 0.0:
        raise TemperatureError(f"critical inverse temperature of '{v}' is not positive")
    condensed = condensation(g, scc(g).component(v))
    return critical_beta, analyze_paths(condensed, critical_beta, component_radii(g), tolerances)


def _solve(system: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return linalg.solve(system, rhs)
    except linalg.LinAlgError as exc:
        raise DivergenceError(f"singular system on the extrapolation grid: {exc}") from exc


def _evaluate_grid(
    fn: Callable[[float], np.ndarray], grid: list[float], threads: int
) -> Iterator[tuple[float, np.ndarray]]:
    if threads <= 1:
        for eps in grid:
            yield eps, fn(eps)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start in range(0, len(grid), threads):
            batch = grid[start : start + threads]
            yield from zip(batch, pool.map(fn, batch))


def richardson_limit(
    fn: Callable[[float], np.ndarray],
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    threads: int | None = None,
) -> tuple[np.ndarray, ExtrapolationDiagnostics]:
    """Limit of ``fn(eps)`` as ``eps -> 0+`` by Richardson extrapolation on a halving grid.

    Each tableau row keeps the column with the smallest change; the run stops once
    successive row estimates agree to ``extrapolation_tol``.
    """
    workers = get_settings().threads if threads is None else max(1, threads)
    grid = [tolerances.eps0 * 2.0**-k for k in range(tolerances.grid_depth + 1)]
    rows: list[list[np.ndarray]] = []
    previous_estimate: np.ndarray | None = None
    best: np.ndarray | None = None
    best_change = math.inf
    smallest_eps = grid[0]
    converged = False
    try:
        with closing(_evaluate_grid(fn, grid, workers)) as evaluations:
            for eps, values in evaluations:
                smallest_eps = eps
                row = [np.asarray(values, dtype=float)]
                if rows:
                    for j, earlier in enumerate(rows[-1], start=1):
                        row.append(row[j - 1] + (row[j - 1] - earlier) / (2.0**j - 1.0))
                rows.append(row)
                if len(row) == 1:
                    estimate = row[0]
                else:
                    changes = [float(np.abs(row[j] - row[j - 1]).max()) for j in range(1, len(row))]
                    estimate = row[1 + int(np.argmin(changes))]
                if previous_estimate is not None:
                    change = float(np.abs(estimate - previous_estimate).max())
                    if change < best_change:
                        best, best_change = estimate, change
                    if change < tolerances.extrapolation_tol:
                        converged = True
                        break
                previous_estimate = estimate
    except DivergenceError as exc:
        logger.info("extrapolation grid stopped at eps=%.3g: %s", smallest_eps, exc)

    diagnostics = ExtrapolationDiagnostics(
        depth=len(rows), residual=best_change, smallest_eps=smallest_eps, converged=converged
    )
    if best is None or best_change > tolerances.max_residual:
        raise ExtrapolationError(
            f"extrapolation did not settle (residual {best_change:.3g} after {len(rows)} grid points)",
            diagnostics,
        )
    logger.debug("extrapolation settled: depth=%d residual=%.3g", len(rows), best_change)
    return best, diagnostics


def _limit_state(
    g: Graph, v: str, tolerances: Tolerances, threads: int | None
) -> tuple[StateVector, ExtrapolationDiagnostics, PathCriticalityAnalysis]:
    critical_beta, analysis = _analysis_for(g, v, tolerances)
    upstream = ancestors(g, [v])

    def ratios(eps: float) -> np.ndarray:
        _, column = column_path_sums(g, v, math.exp(-(critical_beta + eps)), upstream)
        return column / column.sum()

    limit, diagnostics = richardson_limit(ratios, tolerances, threads)
    vertices = tuple(sorted(upstream))
    p = np.zeros(len(g))
    p[g.indices(vertices)] = np.clip(limit, 0.0, None)
    decomposition = scc(g)
    for vertex in vertices:
        # Vertices off every maximal critical path carry no mass in the limit.
        if analysis.max_counts[decomposition.component(vertex)] < analysis.max_count:
            p[g.index(vertex)] = 0.0
    p = p / p.sum()

    _, column = column_path_sums(g, v, math.exp(-(critical_beta + diagnostics.smallest_eps)), upstream)
    diagnostics = ExtrapolationDiagnostics(
        depth=diagnostics.depth,
        residual=diagnostics.residual,
        smallest_eps=diagnostics.smallest_eps,
        converged=diagnostics.converged,
        delta_at_smallest_eps=1.0 / float(column.sum()),
    )
    state = StateVector(
        beta=critical_beta,
        vertices=g.vertices,
        p=p,
        delta=np.zeros(len(g)),
        supported_at_infinity=True,
    )
    return state, diagnostics, analysis


def phi_v(
    g: Graph, v: str, tolerances: Tolerances = DEFAULT_TOLERANCES, threads: int | None = None
) -> StateVector:
    state, _, _ = _limit_state(g, v, tolerances, threads)
    return state


def limit_coefficients(
    g: Graph, v: str, tolerances: Tolerances = DEFAULT_TOLERANCES, threads: int | None = None
) -> dict[Component, np.ndarray]:
    """Limits of ``Z^C_{w,v} / Z_v`` at the critical temperature, one full-length vector per component.

    On ``C`` the ratio is ``Z_{w,v} / Z_v``. Upstream of ``C`` a path is split at its
    first entry into ``C``; the prefix stays in ``ancestors(C) - C``, which has no
    pole at the critical temperature.
    """
    critical_beta = beta_v(g, v, tolerances)
    components = crit_v(g, v, tolerances)
    upstream_v = ancestors(g, [v])
    adjacency = g.adjacency.astype(float)
    limits: dict[Component, np.ndarray] = {}
    for component in components:
        positions = g.indices(component)
        prefix = g.indices(ancestors(g, component) - set(component))
        block = adjacency[np.ix_(prefix, prefix)]
        entry = adjacency[np.ix_(prefix, positions)]

        def ratios(
            eps: float,
            positions: list[int] = positions,
            prefix: list[int] = prefix,
            block: np.ndarray = block,
            entry: np.ndarray = entry,
        ) -> np.ndarray:
            x = math.exp(-(critical_beta + eps))
            vertices_v, column_v = column_path_sums(g, v, x, upstream_v)
            full = np.zeros(len(g))
            full[g.indices(vertices_v)] = column_v / float(column_v.sum())
            values = np.zeros(len(g))
            values[positions] = full[positions]
            if prefix:
                values[prefix] = _solve(np.eye(len(prefix)) - x * block, x * (entry @ full[positions]))
            return values

        limit, _ = richardson_limit(ratios, tolerances, threads)
        limits[component] = np.clip(limit, 0.0, None)
    return limits


def decompose(
    g: Graph,
    v: str,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    threads: int | None = None,
    cross_check: bool = True,
) -> DecompositionReport:
    phi, extrapolation, analysis = _limit_state(g, v, tolerances, threads)
    critical = crit_v(g, v, tolerances)
    if frozenset(critical) != analysis.minimal_critical:
        raise KmsGraphError("critical minimal components disagree between spectral and path analysis")

    adjacency = g.adjacency.astype(float)
    scale = math.exp(phi.beta)
    coefficient_vectors: dict[Component, np.ndarray] = {}
    for component in critical:
        positions = g.indices(component)
        values = np.zeros(len(g))
        values[positions] = phi.p[positions]
        upstream = g.indices(ancestors(g, component) - set(component))
        if upstream:
            block = adjacency[np.ix_(upstream, upstream)]
            coupling = adjacency[np.ix_(upstream, positions)] @ phi.p[positions]
            try:
                solution = linalg.solve(scale * np.eye(len(upstream)) - block, coupling)
            except linalg.LinAlgError as exc:
                raise HarmonicError(f"e^beta I - A_D is singular upstream of {component}: {exc}") from exc
            values[upstream] = np.clip(solution, 0.0, None)
        coefficient_vectors[component] = values

    coefficients = {entry.component: 0.0 for entry in minimal_components(g, tolerances)}
    for component, values in coefficient_vectors.items():
        coefficients[component] = float(values.sum())

    numeric = frozenset(component for component, value in coefficients.items() if value > tolerances.support_threshold)
    if numeric != analysis.support:
        raise SupportMismatchError(analysis.support, numeric)

    reconstruction = np.zeros(len(g))
    for component in critical:
        reconstruction += coefficients[component] * psi_C(g, component, tolerances).p
    coefficient_sum = sum(coefficients.values())
    reconstruction_error = float(np.abs(phi.p - reconstruction).max())
    distribution = sum(coefficient_vectors.values(), np.zeros(len(g)))
    distribution_error = float(np.abs(distribution - phi.p).max())
    if (
        abs(coefficient_sum - 1.0) > RECONSTRUCTION_TOL
        or reconstruction_error > RECONSTRUCTION_TOL
        or distribution_error > RECONSTRUCTION_TOL
    ):
        raise ExtrapolationError(
            f"decomposition of '{v}' does not reconstruct the limit state "
            f"(sum {coefficient_sum:.9f}, error {reconstruction_error:.3g})",
            extrapolation,
        )

    deviation: float | None = None
    if cross_check:
        try:
            limits = limit_coefficients(g, v, tolerances, threads)
        except ExtrapolationError as exc:
            logger.warning("limit-coefficient cross-check for %s skipped: %s", v, exc)
        else:
            deviation = max(
                (float(np.abs(limits[component] - coefficient_vectors[component]).max()) for component in critical),
                default=0.0,
            )
            logger.info("limit-coefficient cross-check for %s deviates by %.3g", v, deviation)

    return DecompositionReport(
        vertex=v,
        beta_v=phi.beta,
        coefficients=coefficients,
        phi=phi,
        combinatorial_support=analysis.support,
        analysis=analysis,
        coefficient_vectors=coefficient_vectors,
        diagnostics=DecompositionDiagnostics(
            extrapolation=extrapolation,
            coefficient_sum=coefficient_sum,
            reconstruction_error=reconstruction_error,
            distribution_error=distribution_error,
            limit_coefficient_deviation=deviation,
            tolerances=tolerances,
        ),
    )


def _condensation_classes(
    g: Graph, v: str, tolerances: Tolerances
) -> tuple[float, PathCriticalityAnalysis, dict[Component, PoleClass]]:
    critical_beta, analysis = _analysis_for(g, v, tolerances)
    condensed = analysis.condensation
    radii = component_radii(g)
    classes: dict[int, PoleClass] = {}
    for node in reversed(condensed.topological_order()):
        own = component_class(radii[condensed.nodes[node]])
        successors = condensed.successors(node)
        if successors:
            own = class_mul(own, class_sum((classes[s] for s in successors), tolerances.critical), tolerances.critical)
        classes[node] = own
    return critical_beta, analysis, {condensed.nodes[node]: value for node, value in classes.items()}


def _confirm_closed_form(result: PoleClass, critical_beta: float, count: int, tolerances: Tolerances) -> None:
    if count == 0:
        return
    expected = PoleClass(math.exp(-critical_beta), count)
    if not (class_le(result, expected, tolerances.critical) and class_le(expected, result, tolerances.critical)):
        raise KmsGraphError(f"path-sum class {result} disagrees with critical path count {expected}")


def class_of_Z(g: Graph, w: str, v: str, tolerances: Tolerances = DEFAULT_TOLERANCES) -> PoleClass:
    g.index(w)
    if w not in ancestors(g, [v]):
        raise GraphInputError(f"no path from '{w}' to '{v}': the class is the zero marker")
    critical_beta, analysis, classes = _condensation_classes(g, v, tolerances)
    component = scc(g).component(w)
    result = classes[component]
    _confirm_closed_form(result, critical_beta, analysis.max_counts[component], tolerances)
    return result


def class_of_Z_vC(
    g: Graph, component: tuple[str, ...], v: str, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> PoleClass:
    members = tuple(sorted(component))
    critical_beta, analysis, classes = _condensation_classes(g, v, tolerances)
    if members not in classes:
        raise GraphInputError(f"{{{','.join(members)}}} is not a component reaching '{v}'")
    result = classes[members]
    _confirm_closed_form(result, critical_beta, analysis.max_counts[members], tolerances)
    return result


def class_of_Z_v(g: Graph, v: str, tolerances: Tolerances = DEFAULT_TOLERANCES) -> PoleClass:
    critical_beta, analysis, classes = _condensation_classes(g, v, tolerances)
    result = class_sum(classes.values(), tolerances.critical)
    _confirm_closed_form(result, critical_beta, analysis.max_count, tolerances)
    return result
