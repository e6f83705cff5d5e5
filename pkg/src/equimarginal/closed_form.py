"""Closed-form active-set solver.

With the coefficients sorted so that a_1 >= a_2 >= ... >= a_n, put
e_i = sqrt(a_i / a_1). The optimum funds exactly the first k* projects, where
k* is the last j for which

    j * e_j > e_1 + ... + e_{j-1}

holds in an uninterrupted run starting at j = 2 (k* = 1 if it fails at
j = 2). With S = e_1 + ... + e_k* the allocation is

    x_j = ((k* + 1) * e_j - S) / S   for j <= k*,   0 otherwise,

and every active project ends with the same marginal utility
a_1 * (S / (k* + 1))**2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    Allocation,
    DomainError,
    ProblemInstance,
    SolveResult,
)

__all__ = [
    "RatioVector",
    "normalized_ratios",
    "active_set_size",
    "closed_form_allocation",
    "solve",
    "two_cup_solution",
    "three_cup_solution",
]

_EPS = np.finfo(float).eps
_FIRST_BLOCK = 64


@dataclass(frozen=True, eq=False)
class RatioVector:
    """Square-root ratios ``sqrt(a_(i) / a_(1))`` in descending order."""

    e: np.ndarray

    def __post_init__(self):
        e = np.array(self.e, dtype=float).reshape(-1)
        if e.size == 0:
            raise DomainError("ratio vector is empty")
        if e[0] != 1.0:
            raise DomainError("leading ratio must be exactly 1")
        if np.any(e <= 0) or np.any(e > 1):
            raise DomainError("ratios must lie in (0, 1]")
        if np.any(np.diff(e) > 0):
            raise DomainError("ratios must be non-increasing")
        e.setflags(write=False)
        object.__setattr__(self, "e", e)

    def __len__(self) -> int:
        return int(self.e.size)


def _ratios_from_sorted(sorted_a: np.ndarray) -> RatioVector:
    e = np.sqrt(sorted_a / sorted_a[0])
    e[0] = 1.0
    return RatioVector(e)


def normalized_ratios(p: ProblemInstance) -> RatioVector:
    return _ratios_from_sorted(p.sorted_a)


def active_set_size(e: RatioVector, check_prefix: bool = False) -> int:
    """Number of funded projects, found by a forward scan.

    The scan keeps a running prefix sum and stops at the first ``j`` with
    ``j * e_j <= e_1 + ... + e_{j-1}``. It walks the vector in blocks of
    doubling size, so the cost is proportional to the answer rather than to
    ``len(e)``. The prefix sums are accumulated strictly left to right, which
    makes the result identical to an element-by-element loop.

    With ``check_prefix`` the remainder of the vector is scanned as well and a
    ``RuntimeError`` is raised if the condition holds again after the stop.
    """
    ev = e.e
    n = ev.size
    if n == 1:
        return 1
    running = ev[0]
    start = 1
    block = _FIRST_BLOCK
    while start < n:
        stop = min(n, start + block)
        chunk = ev[start:stop]
        sums = np.cumsum(np.concatenate(([running], chunk)))
        j = np.arange(start + 1, stop + 1, dtype=float)
        holds = j * chunk > sums[:-1]
        if not holds.all():
            k = start + int(np.argmin(holds))
            if check_prefix:
                _check_prefix(ev, k, sums[k - start])
            return k
        running = sums[-1]
        start = stop
        block *= 2
    return n


def _check_prefix(ev: np.ndarray, k: int, sum_before: float) -> None:
    # ev[k] is the first failure (1-based j = k + 1); sum_before = e_1 + ... + e_k
    tail = ev[k:]
    sums = np.cumsum(np.concatenate(([sum_before], tail)))
    j = np.arange(k + 1, ev.size + 1, dtype=float)
    holds = j * tail > sums[:-1]
    if holds.any():
        bad = k + 1 + int(np.argmax(holds))
        raise RuntimeError(f"active-set condition holds again at j={bad} after failing at j={k + 1}")


def closed_form_allocation(e: RatioVector, k: int) -> Allocation:
    """Optimal allocation in descending-coefficient order for active size ``k``.

    Negative floating-point dust on the last active coordinate is clamped to
    zero. Passing a ``k`` beyond the true active set raises ``DomainError``,
    except at exact boundary equality where the extra coordinate is 0 anyway.
    """
    ev = e.e
    n = ev.size
    if not 1 <= k <= n:
        raise DomainError(f"active set size {k} outside [1, {n}]")
    x = np.zeros(n)
    if k == 1:
        x[0] = 1.0
        return Allocation(x)
    s = math.fsum(ev[:k])
    head = ((k + 1) * ev[:k] - s) / s
    dust = max(1e-15, 4.0 * k * _EPS)
    if np.any(head < -dust):
        raise DomainError(f"active set size {k} includes a project that should be unfunded")
    x[:k] = np.maximum(head, 0.0)
    return Allocation(x)


def _common_marginal(top: float, e: RatioVector, k: int) -> float:
    s = math.fsum(e.e[:k])
    return top * (s / (k + 1)) ** 2


def _assemble(p: ProblemInstance, e: RatioVector, k: int, xs: Allocation) -> SolveResult:
    x = np.empty(p.n)
    x[p.order] = xs.x
    active = p.order[:k]
    objective = math.fsum(p.a[active] * x[active] / (1.0 + x[active]))
    return SolveResult(
        allocation=Allocation(x),
        active_count=k,
        objective=objective,
        lam=_common_marginal(float(p.a[p.order[0]]), e, k),
        sorted_allocation=xs,
    )


def solve(p: ProblemInstance) -> SolveResult:
    """Exact optimum of the allocation problem for any positive coefficients.

    Input may be in any order and may contain ties; the allocation is reported
    in the caller's order. Equal coefficients get equal shares.
    """
    if not isinstance(p, ProblemInstance):
        p = ProblemInstance(p)
    if p.n == 1:
        e = RatioVector(np.ones(1))
        return _assemble(p, e, 1, Allocation(np.ones(1)))
    e = normalized_ratios(p)
    k = active_set_size(e)
    return _assemble(p, e, k, closed_form_allocation(e, k))


def two_cup_solution(a1: float, a2: float) -> tuple[float, float]:
    """Explicit optimum for two cups with ``a1 >= a2 > 0``."""
    if not a1 >= a2 > 0:
        raise DomainError(f"need a1 >= a2 > 0, got ({a1}, {a2})")
    if a2 > a1 / 4:
        r1, r2 = math.sqrt(a1), math.sqrt(a2)
        return (2 * r1 - r2) / (r1 + r2), (2 * r2 - r1) / (r1 + r2)
    return 1.0, 0.0


def three_cup_solution(a1: float, a2: float, a3: float) -> tuple[float, float, float]:
    """Explicit optimum for three cups with ``a1 >= a2 >= a3 > 0``."""
    if not a1 >= a2 >= a3 > 0:
        raise DomainError(f"need a1 >= a2 >= a3 > 0, got ({a1}, {a2}, {a3})")
    e1, e2, e3 = 1.0, math.sqrt(a2 / a1), math.sqrt(a3 / a1)
    if 3 * e3 > e1 + e2:
        s = e1 + e2 + e3
        return (3 * e1 - e2 - e3) / s, (3 * e2 - e1 - e3) / s, (3 * e3 - e1 - e2) / s
    if 2 * e2 > e1:
        s = e1 + e2
        return (2 * e1 - e2) / s, (2 * e2 - e1) / s, 0.0
    return 1.0, 0.0, 0.0
