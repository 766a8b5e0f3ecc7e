"""Accuracy allocation for the subset procedure under a total evaluation budget.

Estimating every proper subset once, the summed variance of the Shapley
estimates is minimized by accuracies proportional to
sqrt((p-|u|)! |u|! (p-|u|-1)! (|u|-1)! Var(W_u elementary)). With the
elementary variances unknown and taken equal, the working rule becomes

    N_u = max(1, Round(N_tot / (kappa * C(p,|u|) * (p-1))))

which depends on |u| only. Rounding makes the realized cost
kappa * sum_u N_u drift from the requested budget, so the requested N_tot is
rescaled (at most 20 multiplicative updates) and the plan closest to the
request without exceeding it is kept; budgets so small that the N_u >= 1
floors dominate are flagged, and only they may force an overrun.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import AllocationError
from .subsets import binomial_row, check_dim, full_mask, popcounts
from .util import round_half_up

_MAX_RESCALE_ITERATIONS = 20


@dataclass(frozen=True)
class AllocationPlan:
    """Per-subset accuracies N_u and the cost ledger of an allocation."""

    p: int
    cost_unit: int
    requested_ntot: int
    per_subset: np.ndarray  # (2**p,) int64, zero at the empty and full masks
    scaled_ntot: float  # the rescaled budget the rounding was evaluated at
    floor_dominated: bool  # requested budget below kappa * (2**p - 2)
    over_budget: bool  # floors forced the realized cost above the request

    @property
    def realized_cost(self) -> int:
        """kappa * sum_u N_u, the cost actually spent by the subset procedure."""
        return int(self.cost_unit * int(self.per_subset.sum()))

    def accuracy(self, mask: int) -> int:
        return int(self.per_subset[mask])

    @property
    def per_size(self) -> np.ndarray:
        """N_u by subset size (meaningful for size-symmetric plans)."""
        sizes = popcounts(self.p)
        out = np.zeros(self.p + 1, dtype=np.int64)
        for k in range(1, self.p):
            members = np.flatnonzero(sizes == k)
            out[k] = self.per_subset[members[0]]
        return out


def heuristic_size_counts(p: int, cost_unit: int, ntot: float) -> np.ndarray:
    """N_k = max(1, Round(ntot / (kappa C(p,k) (p-1)))) for k = 1..p-1.

    This is the equal-variance working rule evaluated directly at `ntot`,
    before any budget rescaling. Index 0 and p of the returned array are 0.
    """
    check_dim(p)
    if p < 2:
        raise AllocationError("allocation needs p >= 2")
    if cost_unit < 1:
        raise AllocationError(f"cost unit must be a positive integer, got {cost_unit}")
    binom = binomial_row(p)
    counts = np.zeros(p + 1, dtype=np.int64)
    raw = ntot / (cost_unit * binom[1:p] * (p - 1))
    counts[1:p] = np.maximum(1, round_half_up(raw))
    return counts


def _realized(p: int, cost_unit: int, counts: np.ndarray) -> int:
    binom = binomial_row(p)
    return int(cost_unit * np.sum(binom[1:p] * counts[1:p]))


def allocate_subset_budget(p: int, cost_unit: int, ntot: int, adjust: bool = True) -> AllocationPlan:
    """Size-symmetric accuracy plan whose realized cost tracks the budget.

    With adjust=True the budget fed to the rounding rule is rescaled so the
    realized cost lands as close to `ntot` as the integers allow, never above
    it unless the N_u >= 1 floors make that impossible (flagged).
    """
    if ntot < 1:
        raise AllocationError(f"total budget must be positive, got {ntot}")
    baseline = heuristic_size_counts(p, cost_unit, ntot)
    floor_dominated = ntot < cost_unit * ((1 << p) - 2)

    best_counts, scaled = baseline, float(ntot)
    if adjust:
        best_counts, scaled, over = _rescale(p, cost_unit, ntot)
    else:
        over = _realized(p, cost_unit, baseline) > ntot

    per_subset = np.zeros(1 << p, dtype=np.int64)
    sizes = popcounts(p)
    proper = (sizes > 0) & (sizes < p)
    per_subset[proper] = best_counts[sizes[proper]]
    return AllocationPlan(
        p=p,
        cost_unit=int(cost_unit),
        requested_ntot=int(ntot),
        per_subset=per_subset,
        scaled_ntot=scaled,
        floor_dominated=bool(floor_dominated),
        over_budget=bool(over),
    )


def _rescale(p: int, cost_unit: int, target: int):
    """Multiplicative fixed-point updates of the budget fed to the rounding rule."""
    best_under = None  # (realized, scaled, counts), maximizing realized <= target
    best_over = None  # minimizing realized > target
    s = float(target)
    seen = set()
    for _ in range(_MAX_RESCALE_ITERATIONS):
        counts = heuristic_size_counts(p, cost_unit, s)
        realized = _realized(p, cost_unit, counts)
        if realized <= target and (best_under is None or realized > best_under[0]):
            best_under = (realized, s, counts)
        if realized > target and (best_over is None or realized < best_over[0]):
            best_over = (realized, s, counts)
        if realized == target or realized in seen:
            break
        seen.add(realized)
        s *= target / realized
    if best_under is not None:
        _, scaled, counts = best_under
        return counts, scaled, False
    _, scaled, counts = best_over
    return counts, scaled, True


@dataclass(frozen=True)
class OptimalAllocation:
    """Relaxed (real-valued) optimum and its rounded companion plan."""

    real_per_subset: np.ndarray  # (2**p,) float, zero at empty/full masks
    plan: AllocationPlan


def allocate_optimal_given_variances(
    p: int, cost_unit: int, ntot: int, variances
) -> OptimalAllocation:
    """Variance-weighted optimal accuracies for the subset procedure.

    `variances` maps proper subsets to Var of one elementary estimate, either
    as a dense (2**p,) array or a {mask: value} mapping; all proper-subset
    entries must be present and positive. The real-valued solution satisfies
    kappa * sum N_u = ntot exactly; the companion plan rounds it with the
    N_u >= 1 floor.
    """
    check_dim(p)
    if p < 2:
        raise AllocationError("allocation needs p >= 2")
    if ntot < 1:
        raise AllocationError(f"total budget must be positive, got {ntot}")
    var = np.full(1 << p, np.nan)
    if isinstance(variances, dict):
        for mask, value in variances.items():
            var[int(mask)] = float(value)
    else:
        arr = np.asarray(variances, dtype=float)
        if arr.shape != var.shape:
            raise AllocationError(f"expected {var.shape[0]} variances, got shape {arr.shape}")
        var = arr.copy()

    sizes = popcounts(p)
    proper = (sizes > 0) & (sizes < p)
    v = var[proper]
    if np.isnan(v).any():
        raise AllocationError("a proper subset is missing its elementary variance")
    if (v <= 0).any():
        raise AllocationError("elementary variances must be positive")

    k = sizes[proper]
    fact = np.array([factorial(i) for i in range(p + 1)], dtype=float)
    weights = np.sqrt(fact[p - k] * fact[k] * fact[p - k - 1] * fact[k - 1] * v)
    real = np.zeros(1 << p)
    real[proper] = (ntot / cost_unit) * weights / weights.sum()

    per_subset = np.zeros(1 << p, dtype=np.int64)
    per_subset[proper] = np.maximum(1, round_half_up(real[proper]))
    realized = int(cost_unit * per_subset.sum())
    plan = AllocationPlan(
        p=p,
        cost_unit=int(cost_unit),
        requested_ntot=int(ntot),
        per_subset=per_subset,
        scaled_ntot=float(ntot),
        floor_dominated=ntot < cost_unit * ((1 << p) - 2),
        over_budget=realized > ntot,
    )
    return OptimalAllocation(real_per_subset=real, plan=plan)
