import math

import numpy as np
import pytest

from scipy import linalg

from kmsgraph.config import Tolerances
from kmsgraph.errors import DivergenceError, HarmonicError, TemperatureError
from kmsgraph.models import Graph
from kmsgraph.services import kms
from kmsgraph.services.genfun import geometric_closed_form
from kmsgraph.services.graph_core import ancestors, restriction
from kmsgraph.services.spectral import resolvent


def test_beta_v_uses_components_upstream(subcritical: Graph) -> None:
    assert kms.beta_v(subcritical, "v") == pytest.approx(math.log(3))
    assert kms.beta_v(subcritical, "u1") == pytest.approx(math.log(math.sqrt(2)))


def test_beta_v_is_minus_infinity_without_cycles() -> None:
    g = Graph.from_edges([("a", "b", 1)])
    assert kms.beta_v(g, "b") == -math.inf


def test_Z_closed_form_on_chain(chains: Graph) -> None:
    assert kms.Z(chains, "w1", "v1", math.log(3)) == pytest.approx(9 / 8, rel=1e-12)


def test_Z_v_closed_form_on_chain(chains: Graph) -> None:
    beta = math.log(2) + 0.1
    x = math.exp(-beta)
    f1, f2 = geometric_closed_form(1, beta), geometric_closed_form(2, beta)
    expected = f1 * (1 + x * f1 + x * f2 + x * x * f1 * f2 + x * x * f2 * f2)
    assert kms.Z_v(chains, "v1", beta) == pytest.approx(expected, rel=1e-10)


def test_Z_matches_dense_resolvent(subcritical: Graph) -> None:
    beta = math.log(3) + 0.25
    dense = resolvent(subcritical.adjacency.astype(float), math.exp(-beta))
    for w in subcritical.vertices:
        for v in subcritical.vertices:
            expected = dense[subcritical.index(w), subcritical.index(v)]
            assert kms.Z(subcritical, w, v, beta) == pytest.approx(expected, rel=1e-10, abs=1e-14)


def test_Z_only_needs_convergence_between_endpoints(subcritical: Graph) -> None:
    beta = math.log(2.5)
    assert kms.Z(subcritical, "u1", "u1", beta) > 1.0
    with pytest.raises(DivergenceError, match="divergent"):
        kms.Z(subcritical, "u1", "v", beta)


def test_Z_is_zero_without_paths(subcritical: Graph) -> None:
    assert kms.Z(subcritical, "v", "u1", 5.0) == 0.0


def test_Z_v_diverges_at_critical_temperature(chains: Graph) -> None:
    with pytest.raises(DivergenceError, match="divergent"):
        kms.Z_v(chains, "v1", math.log(2))


def test_component_sums(subcritical: Graph) -> None:
    beta = math.log(3) + 0.5
    total = kms.Z_vC(subcritical, ["u1", "u2"], "v", beta)
    assert total == pytest.approx(kms.Z(subcritical, "u1", "v", beta) + kms.Z(subcritical, "u2", "v", beta))
    through = kms.Z_wvC(subcritical, "u1", ["w1"], "v", beta)
    assert through == pytest.approx(kms.Z(subcritical, "u1", "w1", beta) * kms.Z(subcritical, "w1", "v", beta))


def test_type_I_state_satisfies_kms_recursion(chains: Graph) -> None:
    state = kms.type_I_state(chains, "u1", math.log(2) + 0.2)
    assert state.p.sum() == pytest.approx(1.0)
    assert not state.supported_at_infinity
    assert kms.kms_residual(chains, state) < 1e-12
    assert state.delta[chains.index("u1")] == pytest.approx(1.0 / kms.Z_v(chains, "u1", state.beta))
    outside = [vertex for vertex in chains.vertices if vertex not in {"u1", "w1"}]
    assert all(state.value(vertex) == 0.0 for vertex in outside)


def test_type_I_state_requires_supercritical_beta(subcritical: Graph) -> None:
    with pytest.raises(TemperatureError, match="below critical temperature"):
        kms.type_I_state(subcritical, "v", math.log(3))


def test_minimal_components(subcritical: Graph, chains: Graph) -> None:
    assert {entry.component for entry in kms.minimal_components(subcritical)} == {("u1", "u2"), ("w1",), ("w2",)}
    assert {entry.component for entry in kms.minimal_components(chains)} == {("w1",), ("w2",), ("w3",), ("w4",)}


def test_crit_v(subcritical: Graph, chains: Graph) -> None:
    assert kms.crit_v(subcritical, "v") == (("w1",), ("w2",))
    assert kms.crit_v(chains, "v1") == (("w1",), ("w2",), ("w3",), ("w4",))


def test_crit_v_requires_positive_critical_temperature() -> None:
    with pytest.raises(TemperatureError, match="not positive"):
        kms.crit_v(Graph.from_edges([("a", "a", 1), ("a", "b", 1)]), "b")


def test_harmonic_extend_solves_upstream_block(subcritical: Graph) -> None:
    a = 7 / 23
    harmonic = kms.harmonic_extend(subcritical, ["w1"], np.array([a]), math.log(3))
    values = dict(zip(harmonic.vertices, harmonic.values))
    assert values["w1"] == pytest.approx(a)
    assert values["u1"] == pytest.approx(3 * a / 7)
    assert values["u2"] == pytest.approx(a / 7)
    assert values["v"] == 0.0 and values["w2"] == 0.0
    assert kms.is_harmonic(subcritical, harmonic)


def test_harmonic_extend_rejects_non_harmonic_seed(subcritical: Graph) -> None:
    with pytest.raises(HarmonicError, match="not beta-harmonic"):
        kms.harmonic_extend(subcritical, ["w1"], np.array([1.0]), math.log(2))


def test_psi_C_golden_values(subcritical: Graph) -> None:
    state = kms.psi_C(subcritical, ["w1"])
    assert state.supported_at_infinity
    assert state.value("w1") == pytest.approx(7 / 11, abs=1e-12)
    assert state.value("u1") == pytest.approx(3 / 11, abs=1e-12)
    assert state.value("u2") == pytest.approx(1 / 11, abs=1e-12)
    assert not state.delta.any()
    assert kms.is_harmonic(subcritical, state)


def test_psi_C_requires_minimal_component(subcritical: Graph) -> None:
    with pytest.raises(HarmonicError, match="positive minimal component"):
        kms.psi_C(subcritical, ["v"])


def test_is_harmonic_reports_violations(subcritical: Graph) -> None:
    zero = kms.HarmonicVector(beta=1.0, vertices=subcritical.vertices, values=np.zeros(5))
    assert kms.is_harmonic(subcritical, zero).is_zero
    point = np.zeros(5)
    point[subcritical.index("v")] = 1.0
    check = kms.is_harmonic(subcritical, kms.HarmonicVector(beta=math.log(2), vertices=subcritical.vertices, values=point))
    assert not check
    assert check.violation == "A h differs from e^beta h"


def test_extremal_states_group_by_temperature(subcritical: Graph) -> None:
    groups = kms.extremal_states(subcritical)
    assert [group.beta for group in groups] == pytest.approx([math.log(math.sqrt(2)), math.log(3)])
    assert set(groups[0].states) == {("u1", "u2")}
    assert set(groups[1].states) == {("w1",), ("w2",)}


def test_type_I_vertices_and_cone_dimension(subcritical: Graph, chains: Graph) -> None:
    assert kms.type_I_vertices(subcritical, math.log(2.5)) == ("u1", "u2")
    assert kms.harmonic_cone_dimension(subcritical, math.log(3)) == 2
    assert kms.harmonic_cone_dimension(chains, math.log(2)) == 4
    assert kms.harmonic_cone_dimension(chains, math.log(5)) == 0


@pytest.mark.parametrize(("fixture", "vertex"), [("chains", "v1"), ("subcritical", "v"), ("loops", "a")])
def test_Z_v_strictly_decreases_in_beta(request: pytest.FixtureRequest, fixture: str, vertex: str) -> None:
    g = request.getfixturevalue(fixture)
    betas = kms.beta_v(g, vertex) + np.geomspace(1e-4, 5.0, 25)
    values = [kms.Z_v(g, vertex, float(beta)) for beta in betas]
    assert all(later < earlier for earlier, later in zip(values, values[1:]))


def test_harmonic_extend_is_unique(subcritical: Graph) -> None:
    a = 7 / 23
    beta = math.log(3)
    harmonic = kms.harmonic_extend(subcritical, ["w1"], np.array([a]), beta)
    again = kms.harmonic_extend(subcritical, ["w1"], np.array([a]), beta)
    assert np.array_equal(harmonic.values, again.values)

    # Fixed-point iteration of h_D = e^-beta (A_DD h_D + A_DC h0) converges to the same extension.
    adjacency = subcritical.adjacency.astype(float)
    upstream = subcritical.indices(["u1", "u2"])
    seed = subcritical.indices(["w1"])
    iterate = np.zeros(len(upstream))
    for _ in range(400):
        iterate = math.exp(-beta) * (adjacency[np.ix_(upstream, upstream)] @ iterate + adjacency[np.ix_(upstream, seed)] @ [a])
    assert np.allclose(harmonic.values[upstream], iterate, rtol=1e-12, atol=1e-15)


def test_harmonic_extend_restricts_to_harmonic_vector_on_ancestors(subcritical: Graph) -> None:
    beta = math.log(3)
    harmonic = kms.harmonic_extend(subcritical, ["w2"], np.array([1.0]), beta)
    region = ancestors(subcritical, ["w2"])
    local = restriction(subcritical, region)
    values = harmonic.values[subcritical.indices(region)]
    assert np.allclose(local.adjacency.astype(float) @ values, math.exp(beta) * values, rtol=1e-12)


def test_harmonic_extend_residual_check_ignores_pole_tolerance(subcritical: Graph) -> None:
    loose = Tolerances(critical=1e-3)
    with pytest.raises(HarmonicError, match="not beta-harmonic"):
        kms.harmonic_extend(subcritical, ["w1"], np.array([1.0]), math.log(3) + 1e-6, loose)


def test_beta_v_snap_follows_configured_tolerance(subcritical: Graph) -> None:
    assert kms.beta_v(subcritical, "u1") == pytest.approx(math.log(math.sqrt(2)))
    assert kms.beta_v(subcritical, "u1", Tolerances(critical=0.5)) == 0.0
    assert kms.type_I_vertices(subcritical, 0.1, Tolerances(critical=0.5)) == ("u1", "u2")


def test_singular_solves_raise_package_errors(subcritical: Graph, monkeypatch: pytest.MonkeyPatch) -> None:
    def singular(*args: object, **kwargs: object) -> np.ndarray:
        raise linalg.LinAlgError("singular matrix")

    monkeypatch.setattr(kms.linalg, "solve", singular)
    with pytest.raises(DivergenceError, match="singular"):
        kms.Z(subcritical, "u1", "v", math.log(3) + 0.5)
    with pytest.raises(HarmonicError, match="singular"):
        kms.harmonic_extend(subcritical, ["w1"], np.array([1.0]), math.log(3))
