"""Timing harness for the closed-form solver.

Instances come from SplitMix64 (Steele, Lea & Flood 2014) so any port that
implements the same few lines reproduces them bit for bit:

    state_i = seed + (i + 1) * 0x9E3779B97F4A7C15        (mod 2**64)
    z = state_i
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9            (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB            (mod 2**64)
    z =  z ^ (z >> 31)
    u_i = (z >> 11) * 2**-53                             in [0, 1)
    a_i = 1 - 0.99 * u_i                                 in (0.01, 1]

Repetition ``r`` of a benchmark uses seed ``seed + r``.
"""

from __future__ import annotations

import hashlib
import statistics
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .closed_form import _assemble, _ratios_from_sorted, active_set_size, closed_form_allocation
from .model import Allocation, ProblemInstance, kkt_check

__all__ = [
    "PHASES",
    "BenchReport",
    "KktFailure",
    "splitmix64",
    "generate_instance",
    "timed_solve",
    "run_bench",
]

PHASES = ("sort", "ratios", "active_set", "allocation")

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class KktFailure(RuntimeError):
    pass


def splitmix64(seed: int, n: int) -> np.ndarray:
    """First ``n`` SplitMix64 outputs for ``seed`` as ``uint64``."""
    seed = np.uint64(seed % 2**64)
    with np.errstate(over="ignore"):
        z = seed + np.arange(1, n + 1, dtype=np.uint64) * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return z


def generate_instance(n: int, seed: int) -> ProblemInstance:
    if n < 1:
        raise ValueError("n must be at least 1")
    u = (splitmix64(seed, n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return ProblemInstance(1.0 - 0.99 * u)


def timed_solve(p: ProblemInstance):
    """Solve ``p`` and return ``(result, {phase: nanoseconds})``."""
    clock = time.perf_counter_ns
    t0 = clock()
    sorted_a = p.sorted_a
    t1 = clock()
    e = _ratios_from_sorted(sorted_a)
    t2 = clock()
    k = active_set_size(e)
    t3 = clock()
    if p.n == 1:
        xs = Allocation(np.ones(1))
    else:
        xs = closed_form_allocation(e, k)
    result = _assemble(p, e, k, xs)
    t4 = clock()
    return result, dict(zip(PHASES, (t1 - t0, t2 - t1, t3 - t2, t4 - t3)))


@dataclass
class BenchReport:
    n: int
    reps: int
    seed: int
    phase_ns: dict[str, list[int]]
    total_ns: list[int]
    active_counts: list[int]
    checksum: str
    objectives: list[float] = field(repr=False, default_factory=list)

    @property
    def min_ns(self) -> int:
        return min(self.total_ns)

    @property
    def median_ns(self) -> float:
        return statistics.median(self.total_ns)

    @property
    def max_ns(self) -> int:
        return max(self.total_ns)

    def rows(self):
        """``(n, rep, phase, nanoseconds)`` rows, phases then ``total``."""
        for rep in range(self.reps):
            for phase in PHASES:
                yield self.n, rep, phase, self.phase_ns[phase][rep]
            yield self.n, rep, "total", self.total_ns[rep]

    def summary(self) -> dict:
        return {
            "n": self.n,
            "reps": self.reps,
            "seed": self.seed,
            "total_ns": {"min": self.min_ns, "median": self.median_ns, "max": self.max_ns},
            "phase_median_ns": {ph: statistics.median(v) for ph, v in self.phase_ns.items()},
            "active_counts": self.active_counts,
            "checksum": self.checksum,
        }


def run_bench(
    n: int,
    reps: int,
    seed: int,
    tol_active: float = 1e-7,
    tol_inactive: float = 1e-9,
) -> BenchReport:
    """Solve ``reps`` generated instances of size ``n`` and time each phase.

    Every solution is KKT-checked; a failure raises ``KktFailure`` naming the
    seed and repetition. Generation and checking are outside the timed region.
    """
    if n < 1 or reps < 1:
        raise ValueError("n and reps must be at least 1")
    phase_ns = {ph: [] for ph in PHASES}
    totals = []
    objectives = []
    counts = []
    for rep in range(reps):
        p = generate_instance(n, seed + rep)
        result, timings = timed_solve(p)
        report = kkt_check(p, result.allocation, tol_active, tol_inactive)
        if not report.passed:
            raise KktFailure(
                f"KKT check failed for n={n} seed={seed + rep} rep={rep}: "
                f"active deviation {report.max_active_deviation:.3e}, "
                f"inactive violation {report.max_inactive_violation:.3e}"
            )
        for ph, ns in timings.items():
            phase_ns[ph].append(ns)
        totals.append(sum(timings.values()))
        objectives.append(result.objective)
        counts.append(result.active_count)
    digest = hashlib.sha256(struct.pack(f"<{len(objectives)}d", *objectives)).hexdigest()[:16]
    return BenchReport(
        n=n,
        reps=reps,
        seed=seed,
        phase_ns=phase_ns,
        total_ns=totals,
        active_counts=counts,
        checksum=digest,
        objectives=objectives,
    )
