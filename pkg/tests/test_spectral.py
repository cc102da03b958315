import math

import networkx as nx
import numpy as np
import pytest

from kmsgraph.errors import DivergenceError, SpectralError
from kmsgraph.services.spectral import perron_data, pole_residue, resolvent, spectral_radius


def _random_irreducible(rng: np.random.Generator) -> np.ndarray:
    n = int(rng.integers(1, 9))
    matrix = rng.integers(0, 4, size=(n, n)) * (rng.random((n, n)) < 0.4)
    order = rng.permutation(n)
    for i in range(n):
        matrix[order[i], order[(i + 1) % n]] += 1
    return matrix.astype(float)


def test_spectral_radius_of_small_graphs() -> None:
    assert spectral_radius(np.array([[2.0]])) == 2.0
    assert spectral_radius(np.array([[0.0, 2.0], [1.0, 0.0]])) == pytest.approx(math.sqrt(2), rel=1e-12)
    assert spectral_radius(np.array([[3.0, 0.0], [5.0, 1.0]])) == pytest.approx(3.0, rel=1e-12)


def test_spectral_radius_is_exactly_zero_for_nilpotent_matrices() -> None:
    assert spectral_radius(np.array([[0.0, 1.0], [0.0, 0.0]])) == 0.0
    assert spectral_radius(np.zeros((3, 3))) == 0.0


def test_spectral_radius_rejects_bad_input() -> None:
    with pytest.raises(SpectralError, match="square"):
        spectral_radius(np.ones((2, 3)))
    with pytest.raises(SpectralError, match="nonnegative"):
        spectral_radius(np.array([[-1.0]]))


def test_spectral_radius_matches_numpy_on_random_matrices() -> None:
    rng = np.random.default_rng(7)
    for _ in range(30):
        matrix = _random_irreducible(rng)
        expected = float(np.abs(np.linalg.eigvals(matrix)).max())
        assert spectral_radius(matrix) == pytest.approx(expected, rel=1e-9)


def test_perron_data_eigenvector_identities() -> None:
    matrix = np.array([[0.0, 2.0], [1.0, 0.0]])
    perron = perron_data(matrix)
    assert perron.rho == pytest.approx(math.sqrt(2), rel=1e-12)
    assert np.allclose(matrix @ perron.left, perron.rho * perron.left, atol=1e-10)
    assert np.allclose(perron.right @ matrix, perron.rho * perron.right, atol=1e-10)
    assert perron.left.sum() == pytest.approx(1.0)
    assert float(perron.right @ perron.left) == pytest.approx(1.0)
    assert np.allclose(perron.projection @ perron.projection, perron.projection, atol=1e-10)
    assert np.all(perron.left > 0) and np.all(perron.right > 0)


def test_perron_data_requires_irreducible_nonnilpotent() -> None:
    with pytest.raises(SpectralError, match="irreducible"):
        perron_data(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(SpectralError, match="zero"):
        perron_data(np.array([[0.0]]))


def test_resolvent_at_zero_is_identity() -> None:
    assert np.array_equal(resolvent(np.array([[0.0, 2.0], [1.0, 0.0]]), 0.0), np.eye(2))


def test_resolvent_of_subcritical_cycle() -> None:
    block = np.array([[0.0, 2.0], [1.0, 0.0]])
    expected = 3.0 * np.array([[3.0, 2.0], [1.0, 3.0]]) / 7.0
    assert np.allclose(resolvent(block, 1.0 / 3.0), expected, atol=1e-12)


def test_resolvent_refuses_pole() -> None:
    with pytest.raises(DivergenceError, match="pole"):
        resolvent(np.array([[2.0]]), 0.5)


def test_pole_residue_matches_numeric_limit() -> None:
    rng = np.random.default_rng(11)
    delta = 1e-5
    for _ in range(50):
        matrix = _random_irreducible(rng)
        n = matrix.shape[0]
        w, v = int(rng.integers(n)), int(rng.integers(n))
        rho = spectral_radius(matrix)
        pole = 1.0 / rho

        def scaled(step: float) -> float:
            z = pole * (1.0 - step)
            return (z - pole) * resolvent(matrix, z)[w, v]

        estimate = 2.0 * scaled(delta / 2.0) - scaled(delta)
        residue = pole_residue(matrix, w, v)
        assert residue < 0.0
        assert estimate == pytest.approx(residue, rel=1e-5)


def test_spectral_radius_is_max_over_component_blocks() -> None:
    rng = np.random.default_rng(13)
    for _ in range(40):
        n = int(rng.integers(2, 10))
        matrix = (rng.integers(0, 3, size=(n, n)) * (rng.random((n, n)) < 0.25)).astype(float)
        digraph = nx.from_numpy_array(matrix, create_using=nx.DiGraph)
        blocks = [sorted(component) for component in nx.strongly_connected_components(digraph)]
        expected = max(spectral_radius(matrix[np.ix_(block, block)]) for block in blocks)
        assert spectral_radius(matrix) == pytest.approx(expected, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("n_terms", [0, 5, 20, 60])
def test_resolvent_power_series_tail_bound(n_terms: int) -> None:
    rng = np.random.default_rng(17)
    for _ in range(10):
        n = int(rng.integers(1, 7))
        upper = rng.integers(0, 3, size=(n, n))
        matrix = (np.triu(upper) + np.triu(upper, 1).T + np.eye(n, dtype=int)).astype(float)
        rho = spectral_radius(matrix)
        z = 0.8 / rho
        partial = sum(np.linalg.matrix_power(z * matrix, k) for k in range(n_terms + 1))
        # Symmetric input: each power has operator 2-norm (z rho)^k, and the sup norm is at most sqrt(n) times that.
        bound = math.sqrt(n) * 0.8 ** (n_terms + 1) / (1 - 0.8)
        assert float(np.abs(resolvent(matrix, z) - partial).sum(axis=1).max()) <= bound + 1e-10
