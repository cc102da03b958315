from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass
from functools import reduce

from kmsgraph.errors import DivergenceError, GraphInputError, SpectralError

DEFAULT_REL_TOL = 1e-9


@dataclass(frozen=True)
class PoleClass:
    """Growth class of a power series at its radius of convergence.

    ``x`` is the radius of convergence and ``order`` the pole order there.
    The unit class (bounded everywhere) is ``x = inf, order = 0``.
    """

    x: float
    order: int

    def __post_init__(self) -> None:
        if self.order < 0:
            raise ValueError("pole order must be nonnegative")
        if (self.order == 0) != math.isinf(self.x):
            raise ValueError("order 0 is reserved for the unit class at x = inf")
        if not self.x > 0.0:
            raise ValueError("radius of convergence must be positive")

    @property
    def is_unit(self) -> bool:
        return self.order == 0

    @property
    def beta(self) -> float:
        return -math.inf if self.is_unit else -math.log(self.x)

    def __add__(self, other: PoleClass) -> PoleClass:
        return class_add(self, other)

    def __mul__(self, other: PoleClass) -> PoleClass:
        return class_mul(self, other)

    def __le__(self, other: PoleClass) -> bool:
        return class_le(self, other)

    def __str__(self) -> str:
        if self.is_unit:
            return "[1]"
        return f"[Phi_{self.x:.12g}]^{self.order}"


UNIT = PoleClass(math.inf, 0)


def same_location(a: float, b: float, rel_tol: float = DEFAULT_REL_TOL) -> bool:
    return math.isclose(a, b, rel_tol=rel_tol, abs_tol=0.0)


def class_add(a: PoleClass, b: PoleClass, rel_tol: float = DEFAULT_REL_TOL) -> PoleClass:
    if same_location(a.x, b.x, rel_tol):
        return PoleClass(min(a.x, b.x), max(a.order, b.order))
    return a if a.x < b.x else b


def class_mul(a: PoleClass, b: PoleClass, rel_tol: float = DEFAULT_REL_TOL) -> PoleClass:
    if same_location(a.x, b.x, rel_tol):
        return PoleClass(min(a.x, b.x), a.order + b.order)
    return a if a.x < b.x else b


def class_le(a: PoleClass, b: PoleClass, rel_tol: float = DEFAULT_REL_TOL) -> bool:
    if same_location(a.x, b.x, rel_tol):
        return a.order <= b.order
    return a.x > b.x


def class_sum(classes: Iterable[PoleClass], rel_tol: float = DEFAULT_REL_TOL) -> PoleClass:
    items = list(classes)
    if not items:
        raise GraphInputError("no paths: the class is the zero marker")
    return reduce(lambda a, b: class_add(a, b, rel_tol), items)


def class_product(classes: Iterable[PoleClass], rel_tol: float = DEFAULT_REL_TOL) -> PoleClass:
    return reduce(lambda a, b: class_mul(a, b, rel_tol), classes, UNIT)


def component_class(rho: float) -> PoleClass:
    if rho < 0.0:
        raise SpectralError("spectral radius must be nonnegative")
    if rho == 0.0:
        return UNIT
    return PoleClass(1.0 / rho, 1)


def geometric_closed_form(n: int, beta: float) -> float:
    if n < 1:
        raise GraphInputError("loop count must be a positive integer")
    ratio = n * math.exp(-beta)
    if ratio >= 1.0:
        raise DivergenceError("series divergent")
    return 1.0 / (1.0 - ratio)
