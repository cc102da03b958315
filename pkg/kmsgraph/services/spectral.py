from __future__ import annotations

import logging
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy import linalg

from kmsgraph.errors import ConvergenceError, DivergenceError, SpectralError

logger = logging.getLogger(__name__)

POWER_ITERATION_CAP = 100_000
RADIUS_TOLERANCE = 1e-12
POLE_MARGIN = 1e-14


@dataclass(frozen=True, eq=False)
class PerronData:
    """Perron root of an irreducible matrix with its eigenvectors.

    ``left`` solves ``A @ left = rho * left`` and sums to 1; ``right`` solves
    ``right @ A = rho * right`` and is scaled so that ``right @ left == 1``.
    ``projection`` is the rank-one spectral projection ``outer(left, right)``.
    """

    rho: float
    left: np.ndarray
    right: np.ndarray
    projection: np.ndarray


def _as_nonnegative_square(matrix: np.ndarray) -> np.ndarray:
    array = np.asarray(matrix, dtype=float)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise SpectralError(f"matrix must be square, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise SpectralError("matrix entries must be finite")
    if np.any(array < 0.0):
        raise SpectralError("matrix entries must be nonnegative")
    return array


def _pattern_graph(array: np.ndarray) -> nx.DiGraph:
    return nx.from_numpy_array(array > 0.0, create_using=nx.DiGraph)


def _is_irreducible(array: np.ndarray) -> bool:
    if array.shape[0] == 1:
        return True
    return nx.is_strongly_connected(_pattern_graph(array))


def _is_nilpotent(array: np.ndarray) -> bool:
    pattern = (array > 0.0).astype(np.int64)
    power = pattern.copy()
    for _ in range(array.shape[0]):
        if not power.any():
            return True
        power = np.minimum(power @ pattern, 1)
    return not power.any()


def _power_iteration(shifted: np.ndarray) -> tuple[float, np.ndarray]:
    # Collatz-Wielandt bounds of a primitive matrix bracket its Perron root.
    n = shifted.shape[0]
    vector = np.full(n, 1.0 / n)
    tolerance = RADIUS_TOLERANCE * max(float(np.abs(shifted).sum(axis=1).max()), 1.0)
    for iteration in range(POWER_ITERATION_CAP):
        image = shifted @ vector
        ratios = image / vector
        low, high = float(ratios.min()), float(ratios.max())
        vector = image / image.sum()
        if high - low <= tolerance:
            logger.debug("power iteration converged after %d steps", iteration + 1)
            return 0.5 * (low + high), vector
    raise ConvergenceError(f"power iteration did not converge in {POWER_ITERATION_CAP} steps")


def _irreducible_radius(block: np.ndarray) -> float:
    if block.shape[0] == 1:
        return float(block[0, 0])
    value, _ = _power_iteration(block + np.eye(block.shape[0]))
    return value - 1.0


def spectral_radius(matrix: np.ndarray) -> float:
    array = _as_nonnegative_square(matrix)
    if array.shape[0] == 0 or _is_nilpotent(array):
        return 0.0
    radius = 0.0
    for members in nx.strongly_connected_components(_pattern_graph(array)):
        positions = sorted(members)
        radius = max(radius, _irreducible_radius(array[np.ix_(positions, positions)]))
    return radius


def perron_data(matrix: np.ndarray) -> PerronData:
    array = _as_nonnegative_square(matrix)
    if array.shape[0] == 0:
        raise SpectralError("empty matrix")
    if not _is_irreducible(array):
        raise SpectralError("matrix not irreducible")
    if _is_nilpotent(array):
        raise SpectralError("spectral radius is zero")
    n = array.shape[0]
    if n == 1:
        one = np.ones(1)
        return PerronData(rho=float(array[0, 0]), left=one, right=one.copy(), projection=np.ones((1, 1)))
    identity = np.eye(n)
    rho_left, left = _power_iteration(array + identity)
    rho_right, right = _power_iteration(array.T + identity)
    left = left / left.sum()
    right = right / float(right @ left)
    return PerronData(
        rho=0.5 * (rho_left + rho_right) - 1.0,
        left=left,
        right=right,
        projection=np.outer(left, right),
    )


def resolvent(matrix: np.ndarray, z: float) -> np.ndarray:
    array = _as_nonnegative_square(matrix)
    if z < 0.0:
        raise SpectralError("resolvent parameter must be nonnegative")
    n = array.shape[0]
    if z * spectral_radius(array) >= 1.0 - POLE_MARGIN:
        raise DivergenceError("resolvent at or beyond pole")
    try:
        inverse = linalg.solve(np.eye(n) - z * array, np.eye(n))
    except linalg.LinAlgError as exc:
        raise DivergenceError(f"resolvent system is singular: {exc}") from exc
    # Entries are sums of nonnegative path weights.
    return np.clip(inverse, 0.0, None)


def pole_residue(matrix: np.ndarray, w: int, v: int) -> float:
    perron = perron_data(matrix)
    return -float(perron.projection[w, v]) / perron.rho
