"""Hamiltonian-path seriation of distance matrices.

The objective is the open path length: the sum of consecutive distances
along a permutation of the observations (the diagram has a first and a
last row, so the path is not closed into a tour).  A permutation and its
reversal have equal length; results are canonicalized so the first index
is no larger than the last.

Solvers:

* ``solve_exact``   - bitmask dynamic programming over (visited-subset,
                      endpoint) states, O(2^n * n^2); globally optimal.
* ``solve_two_opt`` - deterministic segment-reversal local search.
* ``solve_anneal``  - seeded simulated annealing with segment-reversal
                      moves and a final two-opt polish.

All solvers are single-threaded and deterministic per call; separate
calls may run concurrently on shared read-only matrices.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distance import DistanceMatrix
from .errors import SolverError

EXACT_LIMIT = 20  # 2^20 * 20^2 states: the edge of desk-scale time and memory


@dataclass(frozen=True)
class Permutation:
    """Bijection on observation indices."""

    order: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(k) for k in self.order))
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError(f"not a permutation of 0..{len(self.order) - 1}: {self.order}")

    def __len__(self) -> int:
        return len(self.order)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    def reversed(self) -> "Permutation":
        return Permutation(self.order[::-1])

    def canonical(self) -> "Permutation":
        """Reversal-canonical form: first index no larger than the last."""
        if len(self.order) >= 2 and self.order[0] > self.order[-1]:
            return self.reversed()
        return self

    def apply_to(self, items: Sequence) -> tuple:
        if len(items) != len(self.order):
            raise SolverError(f"permutation of size {len(self.order)} applied to {len(items)} items")
        return tuple(items[k] for k in self.order)


@dataclass(frozen=True)
class SeriationResult:
    permutation: Permutation
    objective: float
    method: str  # exact_dp | two_opt | anneal | identity
    seed: int = 0
    iterations: int = 0


def _as_values(m: DistanceMatrix | np.ndarray) -> np.ndarray:
    if isinstance(m, DistanceMatrix):
        return m.values
    return np.asarray(m, dtype=float)


def path_length(p: Permutation | Sequence[int], m: DistanceMatrix | np.ndarray) -> float:
    """Sum of consecutive distances along the permutation."""
    order = np.asarray(p.order if isinstance(p, Permutation) else p, dtype=int)
    values = _as_values(m)
    if order.shape[0] != values.shape[0]:
        raise SolverError(
            f"permutation of size {order.shape[0]} does not match matrix of size {values.shape[0]}"
        )
    if order.shape[0] < 2:
        return 0.0
    return float(values[order[:-1], order[1:]].sum())


def _reversal_delta(values: np.ndarray, order: list[int], i: int, j: int) -> float:
    """Path length change from reversing order[i..j] (symmetric matrix)."""
    d = 0.0
    if i > 0:
        d += values[order[i - 1], order[j]] - values[order[i - 1], order[i]]
    if j < len(order) - 1:
        d += values[order[i], order[j + 1]] - values[order[j], order[j + 1]]
    return d


def solve_exact(m: DistanceMatrix, limit: int = EXACT_LIMIT) -> SeriationResult:
    """Globally minimal path by dynamic programming over subsets.

    State (mask, last) holds the cheapest way to visit exactly the
    observations in ``mask`` ending at ``last``; each state extends to the
    absent indices.  Memory is O(2^n * n), about 170 MB at n = 20.
    Ties are broken by the fixed scan order of the program, then the
    equal-objective endpoint candidates are compared and the
    lexicographically smallest canonical permutation wins.
    """
    n = m.n
    if n > limit:
        raise SolverError(f"exact solver is limited to {limit} observations, got {n}")
    if n == 1:
        return SeriationResult(Permutation((0,)), 0.0, "exact_dp", iterations=1)

    values = m.values
    full = 1 << n
    dp = np.full((full, n), np.inf)
    parent = np.full((full, n), -1, dtype=np.int8)
    for i in range(n):
        dp[1 << i, i] = 0.0

    cols = np.arange(n)
    for mask in range(1, full):
        row = dp[mask]
        cand = row[:, None] + values  # cand[i, j]: extend a mask-path ending at i by j
        best_i = cand.argmin(axis=0)
        best_v = cand[best_i, cols]
        rest = (full - 1) & ~mask
        while rest:
            bit = rest & -rest
            j = bit.bit_length() - 1
            nm = mask | bit
            if best_v[j] < dp[nm, j]:
                dp[nm, j] = best_v[j]
                parent[nm, j] = best_i[j]
            rest ^= bit

    final = dp[full - 1]
    best_obj = final.min()
    candidates = []
    for j in np.flatnonzero(final == best_obj):
        order = [int(j)]
        mask = full - 1
        while parent[mask, order[-1]] >= 0:
            prev = int(parent[mask, order[-1]])
            mask ^= 1 << order[-1]
            order.append(prev)
        order.reverse()
        candidates.append(Permutation(tuple(order)).canonical().order)
    perm = Permutation(min(candidates))
    return SeriationResult(
        permutation=perm,
        objective=path_length(perm, m),
        method="exact_dp",
        iterations=full,
    )


def solve_two_opt(
    m: DistanceMatrix,
    start: Permutation | None = None,
    max_passes: int | None = None,
) -> SeriationResult:
    """Segment-reversal local search from ``start`` (default identity).

    Scans all (i, j) segments in fixed order, applying every improving
    reversal, until a full pass finds none (or ``max_passes`` is hit).
    The result is 2-opt-local: no single segment reversal shortens it.
    """
    n = m.n
    values = m.values
    order = list(start.order if start is not None else range(n))
    if len(order) != n:
        raise SolverError(f"start permutation of size {len(order)} for matrix of size {n}")
    eps = 1e-12 * max(1.0, float(values.max(initial=0.0)))
    passes = 0
    improved = True
    while improved and (max_passes is None or passes < max_passes):
        improved = False
        passes += 1
        for i in range(n - 1):
            for j in range(i + 1, n):
                if i == 0 and j == n - 1:
                    continue  # full reversal: identical path
                if _reversal_delta(values, order, i, j) < -eps:
                    order[i:j + 1] = order[i:j + 1][::-1]
                    improved = True
    perm = Permutation(tuple(order)).canonical()
    return SeriationResult(
        permutation=perm,
        objective=path_length(perm, m),
        method="two_opt",
        iterations=passes,
    )


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric cooling schedule with reheat cycles.

    The iteration budget is split evenly over ``cycles`` quenches; each
    quench restarts from the best permutation found so far with the
    starting temperature halved.  A single quench tends to freeze early
    and waste the rest of its budget, so reheating markedly improves the
    odds of escaping poor local optima.  ``initial_temperature`` of None
    is replaced by the mean off-diagonal distance of the matrix being
    solved, which makes the default scale free.
    """

    initial_temperature: float | None = None
    cooling: float = 0.9995
    iterations: int = 30000
    cycles: int = 6

    def __post_init__(self):
        if self.initial_temperature is not None and not self.initial_temperature > 0:
            raise ValueError("initial_temperature must be positive")
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling factor must be in (0, 1)")
        if self.iterations < 0:
            raise ValueError("iteration budget must be nonnegative")
        if self.cycles < 1:
            raise ValueError("cycles must be positive")


DEFAULT_SCHEDULE = AnnealSchedule()


def solve_anneal(
    m: DistanceMatrix,
    seed: int = 0,
    schedule: AnnealSchedule = DEFAULT_SCHEDULE,
) -> SeriationResult:
    """Seeded simulated annealing over segment reversals.

    Starts from a seeded random permutation, proposes random segment
    reversals under the Metropolis rule, cools geometrically with periodic
    reheats, and always finishes with a deterministic two-opt polish of
    the best permutation seen.  Identical (matrix, seed, schedule) inputs
    reproduce the result bit for bit.
    """
    n = m.n
    values = m.values
    rng = random.Random(seed)
    order = list(range(n))
    rng.shuffle(order)

    if n >= 3 and schedule.iterations > 0:
        temp0 = schedule.initial_temperature
        if temp0 is None:
            off = values[np.triu_indices(n, k=1)]
            mean = float(off.mean()) if off.size else 0.0
            temp0 = mean if mean > 0 else 1.0
        best_order = order[:]
        best_obj = path_length(order, m)
        obj = best_obj
        per_cycle = schedule.iterations // schedule.cycles
        for cycle in range(schedule.cycles):
            temp = temp0 / (2.0 ** cycle)
            for _ in range(per_cycle):
                i = rng.randrange(n - 1)
                j = rng.randrange(i + 1, n)
                delta = _reversal_delta(values, order, i, j)
                if delta < 0 or (temp > 0 and rng.random() < math.exp(-delta / temp)):
                    order[i:j + 1] = order[i:j + 1][::-1]
                    obj += delta
                    if obj < best_obj:
                        best_obj = obj
                        best_order = order[:]
                temp *= schedule.cooling
            order = best_order[:]
            obj = path_length(order, m)
        order = best_order

    polished = solve_two_opt(m, start=Permutation(tuple(order)))
    return SeriationResult(
        permutation=polished.permutation,
        objective=polished.objective,
        method="anneal",
        seed=seed,
        iterations=schedule.iterations,
    )


METHODS = ("auto", "exact", "two_opt", "anneal", "identity")


def seriate(
    m: DistanceMatrix,
    method: str = "auto",
    seed: int = 0,
    schedule: AnnealSchedule = DEFAULT_SCHEDULE,
    exact_limit: int = EXACT_LIMIT,
) -> SeriationResult:
    """Seriate with the chosen method; ``auto`` picks the exact solver up
    to ``exact_limit`` observations and annealing beyond."""
    if method == "auto":
        method = "exact" if m.n <= exact_limit else "anneal"
    if method == "exact":
        return solve_exact(m, limit=exact_limit)
    if method == "two_opt":
        return solve_two_opt(m)
    if method == "anneal":
        return solve_anneal(m, seed=seed, schedule=schedule)
    if method == "identity":
        perm = Permutation.identity(m.n)
        return SeriationResult(perm, path_length(perm, m), "identity")
    raise ValueError(f"unknown seriation method {method!r}; expected one of {METHODS}")
