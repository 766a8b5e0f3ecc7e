"""Conditional-element estimators when exact conditional sampling is available.

Two unbiased per-subset estimators, both averages of i.i.d. elementary
estimates so that procedures can request any accuracy N_u:

* double Monte-Carlo for E_u = E(Var(Y|X_{-u})): draw an anchor X_{-u}, draw
  N_I conditional copies of X_u, take the unbiased sample variance of f over
  them. One elementary estimate costs N_I model evaluations (default N_I = 3).
* pick-and-freeze for V_u = Var(E(Y|X_u)): draw an anchor X_u and two
  conditionally independent copies of X_{-u}; E(f(X) f(X^u)) - E(Y)^2 turns the
  squared conditional expectation into a single product. Cost 2 per elementary
  estimate.

The cost of an estimate is the number of model evaluations, tracked by the
model's EvalBudget. Estimators draw everything through the model's batched
samplers, so a vectorized model makes them vectorized too.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Protocol, runtime_checkable

import numpy as np

from .errors import BudgetExceededError, EstimatorError
from .subsets import as_mask, full_mask, mask_indices


@dataclass
class EvalBudget:
    """Counter of model evaluations, optionally capped."""

    spent: int = 0
    limit: int | None = None

    def charge(self, n: int) -> None:
        n = int(n)
        if n < 0:
            raise ValueError("cannot charge a negative evaluation count")
        if self.limit is not None and self.spent + n > self.limit:
            raise BudgetExceededError(
                f"evaluation budget exceeded: spent {self.spent} + {n} > limit {self.limit}"
            )
        self.spent += n

    def reset(self) -> None:
        self.spent = 0


@runtime_checkable
class InputModel(Protocol):
    """Evaluable model with batched marginal/conditional input samplers.

    evaluate(X) maps an (n, p) array to (n,) outputs and charges the budget by
    n. sample_marginal(v_mask, n, rng) returns n draws of X_v, shape
    (n, |v|). sample_conditional(target_mask, given_mask, given_values, n, rng)
    returns, for each of the m rows of given_values, n mutually independent
    conditional draws of X_target, shape (m, n, |target|).
    """

    p: int
    budget: EvalBudget

    @property
    def mean_y(self) -> float: ...

    @property
    def var_y(self) -> float: ...

    def evaluate(self, x: np.ndarray) -> np.ndarray: ...

    def sample_marginal(self, v_mask: int, n: int, rng: np.random.Generator) -> np.ndarray: ...

    def sample_conditional(
        self,
        target_mask: int,
        given_mask: int,
        given_values: np.ndarray,
        n: int,
        rng: np.random.Generator,
    ) -> np.ndarray: ...


class WEstimate(NamedTuple):
    value: float
    cost: int


class MomentEstimate(NamedTuple):
    mean_y: float
    var_y: float
    cost: int


def _check_proper_subset(u, p: int) -> int:
    mask = as_mask(u, p)
    if mask == 0 or mask == full_mask(p):
        raise EstimatorError(
            "per-subset estimators need a nonempty proper subset "
            f"(got mask {mask} for p={p})"
        )
    return mask


def compose_points(p, mask_a, values_a, mask_b, values_b) -> np.ndarray:
    """Assemble full input points from two complementary coordinate blocks.

    values_a and values_b have shapes (..., |a|) and (..., |b|) with
    broadcast-compatible leading dimensions.
    """
    if mask_a | mask_b != full_mask(p) or mask_a & mask_b:
        raise EstimatorError("coordinate blocks must partition the variables")
    lead = np.broadcast_shapes(values_a.shape[:-1], values_b.shape[:-1])
    out = np.empty(lead + (p,))
    out[..., mask_indices(mask_a)] = np.broadcast_to(values_a, lead + values_a.shape[-1:])
    out[..., mask_indices(mask_b)] = np.broadcast_to(values_b, lead + values_b.shape[-1:])
    return out


def elementary_double_mc(
    model: InputModel, u, count: int, n_inner: int, rng: np.random.Generator
) -> np.ndarray:
    """`count` i.i.d. elementary double-MC estimates of E_u, each costing n_inner."""
    p = model.p
    mask = _check_proper_subset(u, p)
    if n_inner < 2:
        raise EstimatorError(f"inner sample size must be >= 2 to form a variance, got {n_inner}")
    if count < 1:
        raise EstimatorError(f"need at least one elementary estimate, got count={count}")
    comp = mask ^ full_mask(p)
    anchors = model.sample_marginal(comp, count, rng)  # (count, |comp|)
    inner = model.sample_conditional(mask, comp, anchors, n_inner, rng)  # (count, n_inner, |u|)
    points = compose_points(p, comp, anchors[:, None, :], mask, inner)
    y = model.evaluate(points.reshape(-1, p)).reshape(count, n_inner)
    return y.var(axis=1, ddof=1)


def estimate_Eu_double_mc(
    model: InputModel, u, n_u: int, n_inner: int = 3, rng: np.random.Generator | None = None
) -> WEstimate:
    """Double Monte-Carlo estimate of E_u at accuracy n_u; cost n_inner * n_u."""
    if rng is None:
        raise EstimatorError("an explicit rng is required for reproducibility")
    values = elementary_double_mc(model, u, n_u, n_inner, rng)
    return WEstimate(float(values.mean()), int(n_u) * int(n_inner))


def elementary_pick_freeze(
    model: InputModel, u, count: int, rng: np.random.Generator, mean_y: float | None = None
) -> np.ndarray:
    """`count` i.i.d. elementary pick-and-freeze estimates of V_u, each costing 2."""
    p = model.p
    mask = _check_proper_subset(u, p)
    if count < 1:
        raise EstimatorError(f"need at least one elementary estimate, got count={count}")
    if mean_y is None:
        mean_y = model.mean_y
    comp = mask ^ full_mask(p)
    anchors = model.sample_marginal(mask, count, rng)  # (count, |u|)
    pair = model.sample_conditional(comp, mask, anchors, 2, rng)  # (count, 2, |comp|)
    points = compose_points(p, mask, anchors[:, None, :], comp, pair)
    y = model.evaluate(points.reshape(-1, p)).reshape(count, 2)
    return y[:, 0] * y[:, 1] - float(mean_y) ** 2


def estimate_Vu_pick_freeze(
    model: InputModel,
    u,
    n_u: int,
    rng: np.random.Generator | None = None,
    mean_y: float | None = None,
) -> WEstimate:
    """Pick-and-freeze estimate of V_u at accuracy n_u; cost 2 * n_u."""
    if rng is None:
        raise EstimatorError("an explicit rng is required for reproducibility")
    values = elementary_pick_freeze(model, u, n_u, rng, mean_y=mean_y)
    return WEstimate(float(values.mean()), 2 * int(n_u))


def estimate_moments(model: InputModel, n: int, rng: np.random.Generator) -> MomentEstimate:
    """Pilot estimate of E(Y) and Var(Y) from n marginal draws (cost n).

    Procedures treat the result as known afterwards; the pilot cost is reported
    separately from the estimation budget.
    """
    if n < 2:
        raise EstimatorError(f"need n >= 2 draws to estimate a variance, got {n}")
    x = model.sample_marginal(full_mask(model.p), n, rng)
    y = model.evaluate(x)
    return MomentEstimate(float(y.mean()), float(y.var(ddof=1)), int(n))
