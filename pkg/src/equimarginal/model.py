"""Problem data, objective evaluation and KKT certificates.

The problem is

    maximize   F(x) = sum_i a_i x_i / (1 + x_i)
    subject to x_i >= 0,  sum_i x_i = 1,

with every coefficient a_i > 0. Each term is strictly concave, so the optimum
is unique.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "DimensionError",
    "DomainError",
    "PhysicalInterpretationWarning",
    "ProblemInstance",
    "Allocation",
    "SolveResult",
    "KktReport",
    "SUM_TOL",
    "ZERO_THRESHOLD",
    "evaluate_objective",
    "evaluate_min_form",
    "marginal_utilities",
    "simulate_mixing",
    "kkt_check",
]

SUM_TOL = 1e-12
ZERO_THRESHOLD = 1e-12


class DomainError(ValueError):
    """Input outside the mathematical domain of the problem."""


class DimensionError(DomainError):
    """Coefficient and allocation vectors have different lengths."""


class PhysicalInterpretationWarning(UserWarning):
    """A coefficient exceeds 1, so it cannot be read as a concentration."""


def _sum_tolerance(n: int) -> float:
    # 1e-12 for small n, growing like n * eps for very long vectors
    return max(SUM_TOL, 8.0 * n * np.finfo(float).eps)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Positive coefficient vector ``a``.

    The descending order is computed lazily (stable sort), so building an
    instance is O(n) and the sort can be timed on its own.
    """

    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        if a.size == 0:
            raise DomainError("coefficient vector is empty")
        if not np.all(np.isfinite(a)):
            raise DomainError("coefficients must be finite")
        if np.any(a <= 0):
            bad = int(np.flatnonzero(a <= 0)[0])
            raise DomainError(f"coefficient a[{bad}] = {float(a[bad])!r} is not positive")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def n(self) -> int:
        return int(self.a.size)

    @cached_property
    def order(self) -> np.ndarray:
        """``order[r]`` is the original index of the coefficient ranked ``r``."""
        order = np.argsort(-self.a, kind="stable")
        order.setflags(write=False)
        return order

    @cached_property
    def sort_perm(self) -> np.ndarray:
        """``sort_perm[i]`` is the descending rank of original index ``i``."""
        perm = np.empty(self.n, dtype=np.intp)
        perm[self.order] = np.arange(self.n)
        perm.setflags(write=False)
        return perm

    @property
    def sorted_a(self) -> np.ndarray:
        return self.a[self.order]

    @property
    def total(self) -> float:
        return math.fsum(self.a)


@dataclass(frozen=True, eq=False)
class Allocation:
    """A point on the probability simplex."""

    x: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        if x.size == 0:
            raise DomainError("allocation is empty")
        if not np.all(np.isfinite(x)):
            raise DomainError("allocation entries must be finite")
        if np.any(x < 0):
            bad = int(np.flatnonzero(x < 0)[0])
            raise DomainError(f"allocation x[{bad}] = {float(x[bad])!r} is negative")
        total = float(np.sum(x))
        if abs(total - 1.0) > _sum_tolerance(x.size):
            raise DomainError(f"allocation sums to {total!r}, not 1")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @classmethod
    def normalized(cls, weights) -> "Allocation":
        """Rescale nonnegative ``weights`` to sum to one."""
        w = np.array(weights, dtype=float).reshape(-1)
        if np.any(w < 0):
            raise DomainError("weights must be nonnegative")
        total = math.fsum(w)
        if not total > 0:
            raise DomainError("weights sum to zero")
        return cls(w / total)

    def __len__(self) -> int:
        return int(self.x.size)

    def __array__(self, dtype=None, copy=None):
        return self.x if dtype is None else self.x.astype(dtype)


@dataclass(frozen=True)
class SolveResult:
    allocation: Allocation
    active_count: int
    objective: float
    lam: float
    sorted_allocation: Allocation


@dataclass(frozen=True)
class KktReport:
    lam: float
    max_active_deviation: float
    max_inactive_violation: float
    passed: bool


def _coerce(p: ProblemInstance, x) -> np.ndarray:
    if not isinstance(x, Allocation):
        x = Allocation(x)
    if len(x) != p.n:
        raise DimensionError(f"allocation has length {len(x)}, expected {p.n}")
    return x.x


def evaluate_objective(p: ProblemInstance, x) -> float:
    """Return ``sum(a * x / (1 + x))``."""
    xv = _coerce(p, x)
    return math.fsum(p.a * xv / (1.0 + xv))


def evaluate_min_form(p: ProblemInstance, x) -> float:
    """Return ``sum(a / (1 + x))``, the equivalent quantity to minimize.

    ``evaluate_objective(p, x) + evaluate_min_form(p, x) == sum(a)`` since
    a x/(1+x) + a/(1+x) = a for every term.
    """
    xv = _coerce(p, x)
    return math.fsum(p.a / (1.0 + xv))


def marginal_utilities(p: ProblemInstance, x) -> np.ndarray:
    """Partial derivatives ``a_i / (1 + x_i)**2`` of the objective.

    ``x`` may be any nonnegative vector of the right length here; it does not
    need to lie on the simplex.
    """
    if isinstance(x, Allocation):
        xv = x.x
    else:
        xv = np.asarray(x, dtype=float).reshape(-1)
        if np.any(xv < 0):
            raise DomainError("marginal utilities need nonnegative x")
    if xv.size != p.n:
        raise DimensionError(f"x has length {xv.size}, expected {p.n}")
    return p.a / (1.0 + xv) ** 2


def simulate_mixing(p: ProblemInstance, x) -> float:
    """Pour water into cups, draw the same volumes back out, mix them.

    Cup ``i`` starts with one unit of liquid holding tea mass ``a_i``. Adding
    ``x_i`` units of water and then withdrawing ``x_i`` units takes out tea mass
    ``x_i * a_i / (1 + x_i)``. The result is the concentration of everything
    withdrawn (tea mass over liquid volume).
    """
    xv = _coerce(p, x)
    if np.any(p.a > 1.0):
        warnings.warn(
            "coefficients above 1 do not correspond to physical concentrations",
            PhysicalInterpretationWarning,
            stacklevel=2,
        )
    tea_mass = 0.0
    volume_out = 0.0
    for mass, water in zip(p.a.tolist(), xv.tolist()):
        if water == 0.0:
            continue
        cup_volume = 1.0 + water
        concentration = mass / cup_volume
        tea_mass += concentration * water
        volume_out += water
    return tea_mass / volume_out


def kkt_check(
    p: ProblemInstance,
    x,
    tol_active: float = 1e-9,
    tol_inactive: float = 1e-12,
    zero_threshold: float = ZERO_THRESHOLD,
) -> KktReport:
    """Check the equimarginal optimality conditions at ``x``.

    Active coordinates (``x_i > zero_threshold``) must share one marginal
    utility ``lam``; inactive ones must satisfy ``a_i <= lam``.
    """
    if tol_active <= 0 or tol_inactive <= 0 or zero_threshold < 0:
        raise DomainError("tolerances must be positive")
    xv = _coerce(p, x)
    active = xv > zero_threshold
    if not np.any(active):
        raise DomainError("no active coordinate above the zero threshold")
    g = p.a / (1.0 + xv) ** 2
    ga = g[active]
    # centred mean: exact when all active marginals coincide
    lam = float(ga[0] + np.mean(ga - ga[0]))
    dev = float(np.max(np.abs(ga - lam)))
    inactive = ~active
    if np.any(inactive):
        viol = float(max(0.0, np.max(p.a[inactive] - lam)))
    else:
        viol = 0.0
    return KktReport(
        lam=lam,
        max_active_deviation=dev,
        max_inactive_violation=viol,
        passed=dev <= tol_active and viol <= tol_inactive,
    )
