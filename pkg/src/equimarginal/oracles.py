"""Independent numerical solvers used to certify the closed form.

None of these routines use the active-set rule. They reach the same unique
optimum by other means: bisection on the common marginal utility, projected
gradient ascent, and exhaustive search over a lattice on the simplex.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .closed_form import solve
from .model import (
    Allocation,
    DomainError,
    ProblemInstance,
    evaluate_objective,
    kkt_check,
    marginal_utilities,
)

__all__ = [
    "Method",
    "OracleResult",
    "UnsupportedSizeError",
    "GRID_MAX_N",
    "solve_by_lambda_bisection",
    "project_to_simplex",
    "solve_by_projected_gradient",
    "solve_by_grid_search",
    "CrossValidation",
    "cross_validate",
]

GRID_MAX_N = 4


class UnsupportedSizeError(DomainError):
    """Problem too large for an exhaustive method."""


class Method(str, Enum):
    CLOSED_FORM = "closed_form"
    LAMBDA_BISECTION = "lambda_bisection"
    PROJECTED_GRADIENT = "projected_gradient"
    GRID_SEARCH = "grid_search"


@dataclass(frozen=True)
class OracleResult:
    allocation: Allocation
    objective: float
    method: Method
    iterations: int = 0
    resolution: float | None = None
    multiplier: float | None = None
    converged: bool = True
    history: tuple = ()


def _demand(a: np.ndarray, lam: float) -> np.ndarray:
    # x_i(lam) solves a_i / (1 + x_i)^2 = lam, floored at zero
    return np.maximum(0.0, np.sqrt(a / lam) - 1.0)


def solve_by_lambda_bisection(
    p: ProblemInstance, tol_sum: float = 1e-12, max_iter: int = 200
) -> OracleResult:
    """Water-filling on the common marginal utility ``lam``.

    Each project demands ``max(0, sqrt(a_i / lam) - 1)``; total demand falls
    as ``lam`` rises, and ``lam`` is bisected until it equals one. The bracket
    ``(max(a) / (n + 1)**2, max(a)]`` always contains the root: at the lower
    end the largest project alone demands ``n >= 1``, at the upper end nobody
    demands anything.

    The final iterate is rescaled to sum to one exactly.
    """
    if tol_sum <= 0:
        raise DomainError("tol_sum must be positive")
    a = p.a
    top = float(np.max(a))
    lo, hi = top / (p.n + 1) ** 2, top
    s_lo, s_hi = math.fsum(_demand(a, lo)), 0.0
    lam, total = lo, s_lo
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        lam = 0.5 * (lo + hi)
        if lam <= lo or lam >= hi:
            # bracket exhausted at float resolution
            lam, total = (lo, s_lo) if abs(s_lo - 1) <= abs(s_hi - 1) else (hi, s_hi)
            converged = abs(total - 1.0) <= tol_sum
            break
        total = math.fsum(_demand(a, lam))
        assert s_hi <= total <= s_lo, "total demand is not decreasing in lam"
        if abs(total - 1.0) <= tol_sum:
            converged = True
            break
        if total > 1.0:
            lo, s_lo = lam, total
        else:
            hi, s_hi = lam, total
    x = _demand(a, lam)
    if not np.any(x > 0):
        x[int(np.argmax(a))] = 1.0
    alloc = Allocation.normalized(x)
    return OracleResult(
        allocation=alloc,
        objective=evaluate_objective(p, alloc),
        method=Method.LAMBDA_BISECTION,
        iterations=it,
        multiplier=lam,
        converged=converged,
    )


def project_to_simplex(v) -> Allocation:
    """Euclidean projection of ``v`` onto the probability simplex.

    Sort-based: find the largest ``rho`` with ``u_rho > (cumsum(u)_rho - 1) / rho``
    on the descending sort ``u``, then shift everything by that threshold and
    clip at zero.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size == 0:
        raise DomainError("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise DomainError("vector must be finite")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = int(np.flatnonzero(u - css / idx > 0)[-1])
    theta = css[rho] / (rho + 1)
    x = np.maximum(v - theta, 0.0)
    # clean up rounding so the result is an exact simplex point
    return Allocation(x / math.fsum(x))


def solve_by_projected_gradient(
    p: ProblemInstance,
    step: float = 0.1,
    max_iter: int = 100_000,
    tol_improve: float = 1e-15,
) -> OracleResult:
    """Projected gradient ascent from the uniform allocation.

    A step that lowers the objective is retried with half the step size, so
    accepted objective values never decrease. Stops once an accepted step
    improves the objective by less than ``tol_improve``.
    """
    if step <= 0:
        raise DomainError("step must be positive")
    x = Allocation(np.full(p.n, 1.0 / p.n))
    f = evaluate_objective(p, x)
    history = [f]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = marginal_utilities(p, x)
        while True:
            cand = project_to_simplex(x.x + step * grad)
            f_new = evaluate_objective(p, cand)
            if f_new >= f:
                break
            step *= 0.5
            if step < 1e-300:
                break
        if f_new < f:
            converged = True
            break
        improvement = f_new - f
        x, f = cand, f_new
        history.append(f)
        if improvement < tol_improve:
            converged = True
            break
    return OracleResult(
        allocation=x,
        objective=f,
        method=Method.PROJECTED_GRADIENT,
        iterations=it,
        converged=converged,
        history=tuple(history),
    )


def _lattice_best(values: list[np.ndarray], total: int) -> tuple[float, list[int]]:
    """Best split of ``total`` lattice units among separable tables.

    ``values[i][m]`` is project i's return for ``m`` units. Exact search over
    all compositions, organised as a max-plus convolution so that every
    composition is covered without materialising them all.
    """
    best = values[0].copy()
    choices = []
    for table in values[1:-1]:
        new = np.full(total + 1, -np.inf)
        arg = np.zeros(total + 1, dtype=np.intp)
        for m in range(total + 1):
            cand = best[: total + 1 - m] + table[m]
            better = cand > new[m:]
            new[m:][better] = cand[better]
            arg[m:][better] = m
        best = new
        choices.append(arg)
    if len(values) == 1:
        return float(best[total]), [total]
    last = values[-1]
    cand = best[total - np.arange(total + 1)] + last
    m_last = int(np.argmax(cand))
    units = [m_last]
    remaining = total - m_last
    for arg in reversed(choices):
        m = int(arg[remaining])
        units.append(m)
        remaining -= m
    units.append(remaining)
    units.reverse()
    return float(cand[m_last]), units


def solve_by_grid_search(p: ProblemInstance, resolution: float = 1e-3) -> OracleResult:
    """Best lattice point of the simplex with spacing ``resolution``.

    Coordinates are multiples of ``1 / round(1 / resolution)``. Limited to
    ``n <= 4``.
    """
    if p.n > GRID_MAX_N:
        raise UnsupportedSizeError(f"grid search supports n <= {GRID_MAX_N}, got n = {p.n}")
    if not 1e-5 <= resolution <= 1e-1:
        raise DomainError(f"resolution {resolution} outside [1e-5, 1e-1]")
    total = int(round(1.0 / resolution))
    grid = np.arange(total + 1) / total
    tables = [ai * grid / (1.0 + grid) for ai in p.a.tolist()]
    _, units = _lattice_best(tables, total)
    alloc = Allocation(np.array(units, dtype=float) / total)
    return OracleResult(
        allocation=alloc,
        objective=evaluate_objective(p, alloc),
        method=Method.GRID_SEARCH,
        iterations=total,
        resolution=1.0 / total,
    )


@dataclass
class CrossValidation:
    """Outcome of running several methods on one instance."""

    results: dict[Method, OracleResult]
    objective_gaps: dict[tuple[Method, Method], float]
    allocation_distances: dict[tuple[Method, Method], float]
    tol: float
    kkt_passed: bool
    skipped: list[Method] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.kkt_passed and all(g <= self.tol for g in self.objective_gaps.values())


def cross_validate(
    p: ProblemInstance,
    methods=None,
    tol: float = 1e-5,
    resolution: float = 1e-3,
) -> CrossValidation:
    """Run the closed form and the selected oracles, compare every pair.

    ``methods=None`` selects every method that supports the instance size.
    The closed form is always included. Passing requires every pairwise
    objective gap to be within ``tol`` and the closed form to pass its KKT
    check.
    """
    skipped = []
    if methods is None:
        methods = set(Method)
        if p.n > GRID_MAX_N:
            methods.discard(Method.GRID_SEARCH)
            skipped.append(Method.GRID_SEARCH)
    methods = {Method(m) for m in methods} | {Method.CLOSED_FORM}
    if len(methods) < 2:
        raise DomainError("cross validation needs at least one oracle besides the closed form")

    results: dict[Method, OracleResult] = {}
    exact = solve(p)
    results[Method.CLOSED_FORM] = OracleResult(
        allocation=exact.allocation,
        objective=exact.objective,
        method=Method.CLOSED_FORM,
        multiplier=exact.lam,
    )
    if Method.LAMBDA_BISECTION in methods:
        results[Method.LAMBDA_BISECTION] = solve_by_lambda_bisection(p)
    if Method.PROJECTED_GRADIENT in methods:
        results[Method.PROJECTED_GRADIENT] = solve_by_projected_gradient(p)
    if Method.GRID_SEARCH in methods:
        results[Method.GRID_SEARCH] = solve_by_grid_search(p, resolution)

    order = [m for m in Method if m in results]
    gaps = {}
    dists = {}
    for m1, m2 in itertools.combinations(order, 2):
        r1, r2 = results[m1], results[m2]
        gaps[(m1, m2)] = abs(r1.objective - r2.objective)
        dists[(m1, m2)] = float(np.max(np.abs(r1.allocation.x - r2.allocation.x)))
    kkt = kkt_check(p, exact.allocation)
    return CrossValidation(
        results=results,
        objective_gaps=gaps,
        allocation_distances=dists,
        tol=tol,
        kkt_passed=kkt.passed,
        skipped=skipped,
    )
