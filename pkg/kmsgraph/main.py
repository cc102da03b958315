from __future__ import annotations

import argparse
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

import pandas as pd

from kmsgraph import __version__
from kmsgraph.config import Settings, get_settings
from kmsgraph.errors import EXIT_OK, KmsGraphError, OracleCheckError, exit_code_for
from kmsgraph.models import Graph, ReportCommand, ReportFormat
from kmsgraph.schemas import (
    CoefficientRead,
    ComponentRead,
    DecompositionRead,
    DiagnosticsRead,
    ExtremalStateRead,
    FactorizationRead,
    GraphSummary,
    OracleRead,
    PathHistogramRead,
    PoleOrderRead,
    ReportDocument,
    StateRead,
    ToleranceRead,
    TruncationRead,
    VertexTemperatureRead,
)
from kmsgraph.services import decomp, kms, oracle
from kmsgraph.services.graph_core import ancestors
from kmsgraph.services.graph_io import load_graph

logger = logging.getLogger(__name__)

FRACTION_DENOMINATOR_LIMIT = 10**6
ORACLE_BETA_OFFSET = 0.5
ORACLE_REL_TOL = 1e-8
POLE_ORDER_SLACK = 0.1


def _label(component: tuple[str, ...]) -> str:
    return "{" + ",".join(component) + "}"


def _fraction(value: float) -> str:
    return str(Fraction(value).limit_denominator(FRACTION_DENOMINATOR_LIMIT))


def _state_read(state: kms.StateVector, exact_fractions: bool) -> StateRead:
    values = state.as_dict()
    return StateRead(
        beta=state.beta,
        supported_at_infinity=state.supported_at_infinity,
        p=values,
        delta={vertex: float(value) for vertex, value in zip(state.vertices, state.delta)},
        approx_fractions={vertex: _fraction(value) for vertex, value in values.items()} if exact_fractions else None,
    )


def _graph_summary(g: Graph) -> GraphSummary:
    radii = kms.component_radii(g)
    return GraphSummary(
        vertices=list(g.vertices),
        edge_count=g.edge_count,
        components=[
            ComponentRead(
                label=_label(component),
                vertices=list(component),
                spectral_radius=radius,
                beta_c=math.log(radius) if radius > 0.0 else None,
            )
            for component, radius in radii.items()
        ],
    )


def _minimal_components(g: Graph, settings: Settings) -> list[ComponentRead]:
    return [
        ComponentRead(label=_label(entry.component), vertices=list(entry.component), spectral_radius=entry.rho, beta_c=entry.beta)
        for entry in kms.minimal_components(g, settings.tolerances)
    ]


def _temperatures(g: Graph, settings: Settings) -> list[VertexTemperatureRead]:
    rows: list[VertexTemperatureRead] = []
    for vertex in g.vertices:
        critical_beta = kms.beta_v(g, vertex, settings.tolerances)
        rows.append(
            VertexTemperatureRead(
                vertex=vertex,
                beta_v=None if math.isinf(critical_beta) else critical_beta,
                has_critical_states=critical_beta > 0.0,
            )
        )
    return rows


def _base_report(command: ReportCommand, g: Graph, settings: Settings) -> dict[str, object]:
    return {
        "version": __version__,
        "command": command,
        "graph": _graph_summary(g),
        "minimal_components": _minimal_components(g, settings),
        "temperatures": _temperatures(g, settings),
    }


def _diagnostics(settings: Settings, **values: float | int | None) -> DiagnosticsRead:
    return DiagnosticsRead(
        tolerances=ToleranceRead.model_validate(settings.tolerances),
        threads=settings.threads,
        **values,
    )


def cmd_analyze(args: argparse.Namespace, settings: Settings) -> ReportDocument:
    g = load_graph(args.graph)
    extremal = [
        ExtremalStateRead(component=_label(component), beta=group.beta, p=state.as_dict())
        for group in kms.extremal_states(g, settings.tolerances)
        for component, state in group.states.items()
    ]
    return ReportDocument(
        **_base_report(ReportCommand.ANALYZE, g, settings),
        extremal_states=extremal,
        type_i_vertices=list(kms.type_I_vertices(g, args.beta, settings.tolerances)) if args.beta is not None else None,
        diagnostics=_diagnostics(settings),
    )


def cmd_states(args: argparse.Namespace, settings: Settings) -> ReportDocument:
    g = load_graph(args.graph)
    state = kms.type_I_state(g, args.vertex, args.beta)
    return ReportDocument(
        **_base_report(ReportCommand.STATES, g, settings),
        state=_state_read(state, args.exact_fractions),
        diagnostics=_diagnostics(settings, kms_residual=kms.kms_residual(g, state)),
    )


def cmd_decompose(args: argparse.Namespace, settings: Settings) -> ReportDocument:
    g = load_graph(args.graph)
    report = decomp.decompose(g, args.vertex, settings.tolerances, threads=settings.threads)
    analysis = report.analysis
    coefficients = [
        CoefficientRead(
            component=_label(component),
            value=value,
            approx_fraction=_fraction(value) if args.exact_fractions else None,
            in_combinatorial_support=component in report.combinatorial_support,
            max_count=analysis.max_counts.get(component, 0),
        )
        for component, value in report.coefficients.items()
    ]
    decomposition = DecompositionRead(
        vertex=report.vertex,
        beta_v=report.beta_v,
        pole_order=analysis.max_count,
        critical_components=sorted(_label(component) for component in analysis.critical),
        max_counts={_label(component): count for component, count in sorted(analysis.max_counts.items())},
        coefficients=coefficients,
        combinatorial_support=sorted(_label(component) for component in report.combinatorial_support),
        numeric_support=sorted(_label(component) for component in report.numeric_support),
        phi=_state_read(report.phi, args.exact_fractions),
    )
    details = report.diagnostics
    return ReportDocument(
        **_base_report(ReportCommand.DECOMPOSE, g, settings),
        decomposition=decomposition,
        diagnostics=_diagnostics(
            settings,
            extrapolation_depth=details.extrapolation.depth,
            extrapolation_residual=details.extrapolation.residual,
            smallest_eps=details.extrapolation.smallest_eps,
            delta_at_smallest_eps=details.extrapolation.delta_at_smallest_eps,
            coefficient_sum=details.coefficient_sum,
            reconstruction_error=details.reconstruction_error,
            distribution_error=details.distribution_error,
            limit_coefficient_deviation=details.limit_coefficient_deviation,
        ),
    )


def cmd_oracle(args: argparse.Namespace, settings: Settings) -> ReportDocument:
    g = load_graph(args.graph)
    targets = [args.vertex] if args.vertex else list(g.vertices)
    truncations: list[TruncationRead] = []
    factorizations: list[FactorizationRead] = []
    pole_orders: list[PoleOrderRead] = []
    histograms: list[PathHistogramRead] = []
    for v in targets:
        critical_beta = kms.beta_v(g, v, settings.tolerances)
        beta = args.beta if args.beta is not None else max(critical_beta, 0.0) + ORACLE_BETA_OFFSET
        for w in sorted(ancestors(g, [v])):
            truncated = oracle.truncated_Z(g, w, v, beta, args.truncation)
            exact = kms.Z(g, w, v, beta)
            slack = ORACLE_REL_TOL * max(1.0, exact)
            truncations.append(
                TruncationRead(
                    w=w,
                    v=v,
                    beta=beta,
                    n_terms=truncated.n_terms,
                    truncated=truncated.value,
                    tail_bound=None if math.isinf(truncated.tail_bound) else truncated.tail_bound,
                    exact=exact,
                    bracketed=truncated.value - slack <= exact <= truncated.upper + slack,
                )
            )
            check = oracle.factorization_check(g, w, v, beta)
            factorizations.append(
                FactorizationRead(
                    w=w,
                    v=v,
                    beta=beta,
                    product_sum=check.product_sum,
                    direct=check.direct,
                    error=check.error,
                    ok=check.error <= ORACLE_REL_TOL,
                )
            )
            if args.enumerate:
                histogram = oracle.enumerate_paths(g, w, v, args.max_len)
                histograms.append(
                    PathHistogramRead(
                        w=w,
                        v=v,
                        counts=list(histogram.counts),
                        by_sequence={" > ".join(key): list(value) for key, value in sorted(histogram.by_sequence.items())},
                        matches_matrix_powers=histogram.matches_matrix_powers,
                    )
                )
        if critical_beta > 0.0:
            combinatorial = decomp.class_of_Z_v(g, v, settings.tolerances).order
            measured = oracle.measured_pole_order(g, v).slope
            pole_orders.append(
                PoleOrderRead(
                    vertex=v,
                    combinatorial=combinatorial,
                    measured=measured,
                    ok=abs(measured - combinatorial) <= POLE_ORDER_SLACK,
                )
            )
    passed = (
        all(item.bracketed for item in truncations)
        and all(item.ok for item in factorizations)
        and all(item.ok for item in pole_orders)
        and all(item.matches_matrix_powers for item in histograms)
    )
    return ReportDocument(
        **_base_report(ReportCommand.ORACLE, g, settings),
        oracle=OracleRead(
            truncations=truncations,
            factorizations=factorizations,
            pole_orders=pole_orders,
            histograms=histograms,
            passed=passed,
        ),
        diagnostics=_diagnostics(settings),
    )


def _frame_section(title: str, frame: pd.DataFrame) -> str:
    body = frame.to_string(index=False) if not frame.empty else "(none)"
    return f"== {title} ==\n{body}"


def render_table(report: ReportDocument) -> str:
    sections = [
        f"kmsgraph {report.version} {report.command}",
        _frame_section(
            "components",
            pd.DataFrame(
                [
                    {"component": item.label, "rho": item.spectral_radius, "beta_C": item.beta_c}
                    for item in report.graph.components
                ]
            ),
        ),
        _frame_section(
            "positive minimal components",
            pd.DataFrame([{"component": item.label, "rho": item.spectral_radius, "beta_C": item.beta_c} for item in report.minimal_components]),
        ),
        _frame_section("temperatures", pd.DataFrame([item.model_dump() for item in report.temperatures])),
    ]
    if report.extremal_states:
        frame = pd.DataFrame({item.component: item.p for item in report.extremal_states})
        sections.append(_frame_section("extremal states", frame.rename_axis("vertex").reset_index()))
    if report.type_i_vertices is not None:
        sections.append("== type I vertices ==\n" + (", ".join(report.type_i_vertices) or "(none)"))
    if report.state is not None:
        frame = pd.DataFrame({"p": report.state.p, "delta": report.state.delta})
        sections.append(_frame_section(f"state at beta={report.state.beta:.12g}", frame.rename_axis("vertex").reset_index()))
    if report.decomposition is not None:
        decomposition = report.decomposition
        sections.append(
            _frame_section(
                f"decomposition of phi_{decomposition.vertex} (beta_v={decomposition.beta_v:.12g}, M={decomposition.pole_order})",
                pd.DataFrame([item.model_dump() for item in decomposition.coefficients]),
            )
        )
        frame = pd.DataFrame({"p": decomposition.phi.p})
        sections.append(_frame_section("limit state", frame.rename_axis("vertex").reset_index()))
    if report.oracle is not None:
        sections.append(_frame_section("truncation brackets", pd.DataFrame([item.model_dump() for item in report.oracle.truncations])))
        sections.append(_frame_section("factorization", pd.DataFrame([item.model_dump() for item in report.oracle.factorizations])))
        sections.append(_frame_section("pole orders", pd.DataFrame([item.model_dump() for item in report.oracle.pole_orders])))
        sections.append(f"oracle passed: {report.oracle.passed}")
    diagnostics = report.diagnostics.model_dump(exclude={"tolerances"}, exclude_none=True)
    diagnostics.update({f"tol.{key}": value for key, value in report.diagnostics.tolerances.model_dump().items()})
    sections.append(_frame_section("diagnostics", pd.DataFrame([diagnostics])))
    return "\n\n".join(sections) + "\n"


def render(report: ReportDocument, output_format: ReportFormat) -> str:
    if output_format == ReportFormat.TABLE:
        return render_table(report)
    return report.model_dump_json(indent=2) + "\n"


def _add_common_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--graph", required=True, type=Path, help="Edge-list file.")
    parser.add_argument("--format", choices=[item.value for item in ReportFormat], default=ReportFormat.TABLE.value)
    parser.add_argument("--out", type=Path, default=None, help="Write the report here instead of stdout.")
    parser.add_argument("--tol-critical", type=float, default=None)
    parser.add_argument("--support-threshold", type=float, default=None)
    parser.add_argument("--eps0", type=float, default=None)
    parser.add_argument("--grid-depth", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--exact-fractions", action="store_true", help="Add approximate rational forms.")
    parser.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kmsgraph", description="KMS-state analysis of finite directed multigraphs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    analyze = subparsers.add_parser("analyze", help="Components, critical temperatures and extremal states.")
    _add_common_args(analyze)
    analyze.add_argument("--beta", type=float, default=None, help="List vertices with type I states at this beta.")
    analyze.set_defaults(func=cmd_analyze)

    states = subparsers.add_parser("states", help="Type I state at a vertex above its critical temperature.")
    _add_common_args(states)
    states.add_argument("--vertex", required=True)
    states.add_argument("--beta", type=float, required=True)
    states.set_defaults(func=cmd_states)

    decompose = subparsers.add_parser("decompose", help="Limit state at the critical temperature and its decomposition.")
    _add_common_args(decompose)
    decompose.add_argument("--vertex", required=True)
    decompose.set_defaults(func=cmd_decompose)

    check = subparsers.add_parser("oracle", help="Independent numeric cross-checks.")
    _add_common_args(check)
    check.add_argument("--vertex", default=None)
    check.add_argument("--beta", type=float, default=None)
    check.add_argument("--truncation", type=int, default=200)
    check.add_argument("--enumerate", action="store_true", help="Also enumerate paths (small graphs only).")
    check.add_argument("--max-len", type=int, default=12)
    check.set_defaults(func=cmd_oracle)
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        settings = get_settings().override(
            threads=args.threads,
            critical=args.tol_critical,
            support_threshold=args.support_threshold,
            eps0=args.eps0,
            grid_depth=args.grid_depth,
        )
        logger.info("running %s on %s", args.command, args.graph)
        report = args.func(args, settings)
        text = render(report, ReportFormat(args.format))
        if args.out is not None:
            args.out.write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        if report.oracle is not None and not report.oracle.passed:
            raise OracleCheckError("oracle cross-checks failed")
    except KmsGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    return EXIT_OK
