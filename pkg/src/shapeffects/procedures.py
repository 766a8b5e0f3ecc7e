"""The two W-aggregation procedures and the backends that feed them.

A backend turns (subset, accuracy, rng) into conditional-element estimates;
the procedures decide which subsets to estimate at which accuracy under a
total budget, then aggregate:

* subset procedure: estimate every proper subset once at its allocated
  accuracy, store the full table, apply the subset-sum formula. Every estimate
  contributes to every Shapley effect.
* random-permutation procedure: stream M uniform orderings; walking an
  ordering, the estimate produced at one position is reused as the baseline
  of the next position, so each ordering costs kappa * N_O * (p-1)
  evaluations and its increments telescope from 0 to Var(Y) exactly.
* exact-permutation variant: same walk over all p! orderings (small p only).

Estimates along permutations are grouped by subset and generated in batches
from per-subset seed streams, which keeps results reproducible and lets
vectorized backends run fast; since elementary estimates are i.i.d., the
grouping does not change the estimator's distribution.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from enum import Enum
from math import factorial

import numpy as np

from . import core, exact, givendata
from .allocation import allocate_subset_budget
from .errors import InvalidVarianceError, ProcedureError
from .subsets import check_dim, full_mask
from .util import rng_stream


class Procedure(Enum):
    SUBSET = "subset"
    RANDOM_PERMUTATION = "random-perm"
    EXACT_PERMUTATION = "exact-perm"


class EstimatorKind(Enum):
    DOUBLE_MC = "mc"
    PICK_FREEZE = "pf"


class Variant(Enum):
    MIX = "mix"
    KNN = "knn"


class ExactBackend:
    """Per-subset estimation through a model with exact conditional samplers."""

    def __init__(self, model, estimator: EstimatorKind = EstimatorKind.DOUBLE_MC, n_inner: int = 3):
        self.model = model
        self.estimator = estimator
        self.n_inner = int(n_inner)
        self.p = model.p
        self.variant = None

    @property
    def var_y(self) -> float:
        return self.model.var_y

    @property
    def kind(self) -> core.ElementKind:
        return core.E_KIND if self.estimator is EstimatorKind.DOUBLE_MC else core.V_KIND

    @property
    def cost_unit(self) -> int:
        return self.n_inner if self.estimator is EstimatorKind.DOUBLE_MC else 2

    @property
    def evaluations(self) -> int:
        return self.model.budget.spent

    def elementary(self, mask: int, count: int, rng) -> np.ndarray:
        if self.estimator is EstimatorKind.DOUBLE_MC:
            return exact.elementary_double_mc(self.model, mask, count, self.n_inner, rng)
        return exact.elementary_pick_freeze(self.model, mask, count, rng)

    def estimate(self, mask: int, n_u: int, rng) -> float:
        return float(self.elementary(mask, n_u, rng).mean())


class GivenDataBackend:
    """Per-subset estimation from an observed sample (mix or knn variant).

    The knn variant reads stored outputs and performs no model evaluations;
    its accuracies still consume the same work budget kappa * N_u, which is
    what the reported realized cost measures for it.
    """

    def __init__(
        self,
        sample: givendata.DataSample,
        estimator: EstimatorKind = EstimatorKind.DOUBLE_MC,
        variant: Variant = Variant.KNN,
        model=None,
        n_inner: int = 3,
        replacement: bool | None = None,
        mean_y: float | None = None,
        var_y: float | None = None,
    ):
        if variant is Variant.MIX and model is None:
            raise ProcedureError("the mix variant needs an evaluable model")
        if variant is Variant.KNN and sample.outputs is None:
            raise ProcedureError("the knn variant needs the sample's outputs column")
        self.sample = sample
        self.model = model
        self.estimator = estimator
        self.variant = variant
        self.n_inner = int(n_inner)
        self.replacement = replacement
        self.p = sample.p
        self._mean_y = sample.mean_y if mean_y is None else float(mean_y)
        self._var_y = sample.var_y if var_y is None else float(var_y)

    @property
    def var_y(self) -> float:
        return self._var_y

    @property
    def mean_y(self) -> float:
        return self._mean_y

    @property
    def kind(self) -> core.ElementKind:
        return core.E_KIND if self.estimator is EstimatorKind.DOUBLE_MC else core.V_KIND

    @property
    def cost_unit(self) -> int:
        return self.n_inner if self.estimator is EstimatorKind.DOUBLE_MC else 2

    @property
    def evaluations(self) -> int:
        return self.model.budget.spent if self.model is not None else 0

    def elementary(self, mask: int, count: int, rng) -> np.ndarray:
        """count i.i.d. elementary estimates (anchors drawn with replacement)."""
        anchors = rng.integers(0, self.sample.n, size=int(count))
        return self._per_anchor(mask, anchors, rng)

    def estimate(self, mask: int, n_u: int, rng) -> float:
        anchors = givendata.draw_anchor_rows(self.sample, n_u, self.replacement, rng)
        return float(self._per_anchor(mask, anchors, rng).mean())

    def _per_anchor(self, mask, anchors, rng) -> np.ndarray:
        if self.estimator is EstimatorKind.DOUBLE_MC:
            if self.variant is Variant.MIX:
                return givendata.per_anchor_Eu_mc_mix(
                    self.sample, self.model, mask, anchors, self.n_inner, rng
                )
            return givendata.per_anchor_Eu_mc_knn(self.sample, mask, anchors, self.n_inner, rng)
        if self.variant is Variant.MIX:
            return givendata.per_anchor_Vu_pf_mix(
                self.sample, self.model, mask, anchors, rng, self._mean_y
            )
        return givendata.per_anchor_Vu_pf_knn(self.sample, mask, anchors, rng, self._mean_y)


class OracleBackend:
    """Feeds exact table values to the procedures (testing and diagnostics)."""

    def __init__(self, table: core.ConditionalElementTable, cost_unit: int = 3):
        table.require_complete()
        self.table = table
        self.p = table.p
        self.variant = None
        self.estimator = None
        self._cost_unit = int(cost_unit)

    @property
    def var_y(self) -> float:
        return self.table.var_y

    @property
    def kind(self) -> core.ElementKind:
        return self.table.kind

    @property
    def cost_unit(self) -> int:
        return self._cost_unit

    @property
    def evaluations(self) -> int:
        return 0

    def elementary(self, mask: int, count: int, rng) -> np.ndarray:
        return np.full(int(count), self.table.values[mask])

    def estimate(self, mask: int, n_u: int, rng) -> float:
        return float(self.table.values[mask])


@dataclass
class ShapleyReport:
    """One Shapley-effect estimate with its cost and provenance metadata."""

    effects: np.ndarray
    procedure: str
    estimator: str | None
    variant: str | None
    p: int
    var_y: float
    seed: int
    requested_cost: int | None
    realized_cost: int
    model_evaluations: int
    wall_time_s: float
    warnings: tuple = ()
    table: core.ConditionalElementTable | None = None
    extra: dict = field(default_factory=dict)

    @property
    def sum_effects(self) -> float:
        return float(self.effects.sum())

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "procedure": self.procedure,
            "estimator": self.estimator,
            "variant": self.variant,
            "p": self.p,
            "var_y": self.var_y,
            "seed": self.seed,
            "effects": [float(v) for v in self.effects],
            "sum_effects": self.sum_effects,
            "requested_cost": self.requested_cost,
            "realized_cost": self.realized_cost,
            "model_evaluations": self.model_evaluations,
            "wall_time_s": self.wall_time_s,
            "warnings": list(self.warnings),
        }


def _check_backend_variance(backend) -> float:
    var_y = backend.var_y
    if not np.isfinite(var_y) or var_y <= 0:
        raise InvalidVarianceError(
            f"backend reports Var(Y) = {var_y}; a constant model cannot be analyzed"
        )
    return var_y


def _labels(backend):
    estimator = backend.estimator.value if backend.estimator is not None else None
    variant = backend.variant.value if backend.variant is not None else None
    return estimator, variant


def run_subset_procedure(backend, ntot: int, seed: int = 0, keep_table: bool = True) -> ShapleyReport:
    """Estimate every proper subset once under the allocated budget, then aggregate."""
    start = time.perf_counter()
    var_y = _check_backend_variance(backend)
    p = check_dim(backend.p)
    plan = allocate_subset_budget(p, backend.cost_unit, ntot)
    evals_before = backend.evaluations
    table = core.ConditionalElementTable(backend.kind, p, var_y, backend.cost_unit)
    for mask in range(1, full_mask(p)):
        n_u = plan.accuracy(mask)
        value = backend.estimate(mask, n_u, rng_stream(seed, "w", mask))
        table.set_value(mask, value, accuracy=n_u)
    effects = core.shapley_from_subsets(table)
    warnings = []
    if plan.floor_dominated:
        warnings.append(
            "requested budget is below kappa*(2^p - 2); accuracy floors dominate"
        )
    if plan.over_budget:
        warnings.append("accuracy floors forced the realized cost above the request")
    estimator, variant = _labels(backend)
    return ShapleyReport(
        effects=effects,
        procedure=Procedure.SUBSET.value,
        estimator=estimator,
        variant=variant,
        p=p,
        var_y=var_y,
        seed=seed,
        requested_cost=int(ntot),
        realized_cost=plan.realized_cost,
        model_evaluations=backend.evaluations - evals_before,
        wall_time_s=time.perf_counter() - start,
        warnings=tuple(warnings),
        table=table if keep_table else None,
        extra={"plan_scaled_ntot": plan.scaled_ntot},
    )


def _walk_permutations(backend, perms: np.ndarray, n_o: int, seed: int):
    """Estimate each ordering's prefix subsets (grouped by subset) and walk the chains.

    Returns (effects, walk_values) where walk_values[m, i] is the estimate of
    W at position i of ordering m (the last position is the pinned Var(Y));
    the value used as the baseline at position i+1 is exactly walk_values[m, i].
    """
    var_y = backend.var_y
    m_count, p = perms.shape
    bits = (np.int64(1) << perms.astype(np.int64)).astype(np.int64)
    prefix_after = np.bitwise_or.accumulate(bits, axis=1)  # (m, p)

    walk = np.empty((m_count, p))
    walk[:, p - 1] = var_y  # W over all variables is pinned, never estimated
    if p > 1:
        flat = prefix_after[:, : p - 1].ravel()
        order = np.argsort(flat, kind="stable")
        sorted_masks = flat[order]
        boundaries = np.flatnonzero(np.diff(sorted_masks)) + 1
        groups = np.split(np.arange(flat.size), boundaries)
        flat_values = np.empty(flat.size)
        for group in groups:
            mask = int(sorted_masks[group[0]] if group.size else 0)
            positions = order[group]
            values = backend.elementary(mask, group.size * n_o, rng_stream(seed, "w", mask))
            if n_o > 1:
                values = values.reshape(group.size, n_o).mean(axis=1)
            flat_values[positions] = values
        walk[:, : p - 1] = flat_values.reshape(m_count, p - 1)

    deltas = np.diff(walk, axis=1, prepend=0.0)  # increment at each position
    effects = np.zeros(p)
    for i in range(p):
        np.add.at(effects, perms[:, i], deltas[:, i])
    return effects / (m_count * var_y), walk


def run_random_permutation_procedure(
    backend, m: int, seed: int = 0, n_o: int = 1, keep_walk: bool = False
) -> ShapleyReport:
    """M uniform orderings, each walked once with per-position accuracy N_O.

    Total cost kappa * M * N_O * (p-1); N_O = 1 with M as large as the budget
    allows is the variance-optimal choice at fixed cost.
    """
    start = time.perf_counter()
    var_y = _check_backend_variance(backend)
    p = check_dim(backend.p)
    if m < 1:
        raise ProcedureError(f"need at least one permutation, got M={m}")
    if n_o < 1:
        raise ProcedureError(f"per-position accuracy must be >= 1, got {n_o}")
    rng_perm = rng_stream(seed, "perm")
    perms = np.empty((m, p), dtype=np.int64)
    for row in range(m):
        perms[row] = rng_perm.permutation(p)
    evals_before = backend.evaluations
    effects, walk = _walk_permutations(backend, perms, n_o, seed)
    cost = backend.cost_unit * m * n_o * (p - 1)
    estimator, variant = _labels(backend)
    extra = {"m": m, "n_o": n_o}
    if keep_walk:
        extra["permutations"] = perms
        extra["walk_values"] = walk
    return ShapleyReport(
        effects=effects,
        procedure=Procedure.RANDOM_PERMUTATION.value,
        estimator=estimator,
        variant=variant,
        p=p,
        var_y=var_y,
        seed=seed,
        requested_cost=cost,
        realized_cost=cost,
        model_evaluations=backend.evaluations - evals_before,
        wall_time_s=time.perf_counter() - start,
        extra=extra,
    )


MAX_EXACT_PERMUTATION_DIM = 8


def run_exact_permutation_procedure(
    backend, n_o: int = 1, seed: int = 0, keep_walk: bool = False
) -> ShapleyReport:
    """Walk all p! orderings deterministically (per-position accuracy N_O)."""
    start = time.perf_counter()
    var_y = _check_backend_variance(backend)
    p = check_dim(backend.p)
    if n_o < 1:
        raise ProcedureError(f"per-position accuracy must be >= 1, got {n_o}")
    if p > MAX_EXACT_PERMUTATION_DIM:
        cost = backend.cost_unit * n_o * factorial(p) * (p - 1)
        raise ProcedureError(
            f"exact-permutation enumeration for p={p} would need p! = {factorial(p)} "
            f"orderings ({cost} evaluations at N_O={n_o}); use the random-permutation "
            f"procedure instead"
        )
    perms = np.array(list(itertools.permutations(range(p))), dtype=np.int64)
    evals_before = backend.evaluations
    effects, walk = _walk_permutations(backend, perms, n_o, seed)
    cost = backend.cost_unit * n_o * perms.shape[0] * (p - 1)
    estimator, variant = _labels(backend)
    extra = {"m": perms.shape[0], "n_o": n_o}
    if keep_walk:
        extra["permutations"] = perms
        extra["walk_values"] = walk
    return ShapleyReport(
        effects=effects,
        procedure=Procedure.EXACT_PERMUTATION.value,
        estimator=estimator,
        variant=variant,
        p=p,
        var_y=var_y,
        seed=seed,
        requested_cost=cost,
        realized_cost=cost,
        model_evaluations=backend.evaluations - evals_before,
        wall_time_s=time.perf_counter() - start,
        extra=extra,
    )
