"""Conditional-element tables and the two exact Shapley aggregation formulas.

A conditional element W_u is either V_u = Var(E(Y|X_u)) or
E_u = E(Var(Y|X_{-u})). Given the full table (W_u) over all subsets, the
Shapley effect of variable i is

    eta_i = 1/(p Var(Y)) * sum_{u not containing i} C(p-1,|u|)^-1 (W_{u+i} - W_u)

or, equivalently, the average over all p! orderings of the increment W gains
when i joins the variables placed before it. Both formulas are implemented;
they agree exactly on complete tables. W_empty = 0 and W_full = Var(Y) are
pinned, which makes every estimate vector sum to exactly one.

Everything here is pure arithmetic on immutable inputs; no estimation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    IncompleteTableError,
    InvalidVarianceError,
    SubsetError,
    TableKindError,
)
from .subsets import (
    SubsetIndex,
    as_mask,
    binomial_row,
    check_dim,
    full_mask,
    popcounts,
)


class ElementKind(Enum):
    """Which conditional element a table stores."""

    VARIANCE_OF_CONDITIONAL_EXPECTATION = "V"  # V_u = Var(E(Y|X_u))
    EXPECTATION_OF_CONDITIONAL_VARIANCE = "E"  # E_u = E(Var(Y|X_{-u}))

    @property
    def other(self) -> "ElementKind":
        if self is ElementKind.VARIANCE_OF_CONDITIONAL_EXPECTATION:
            return ElementKind.EXPECTATION_OF_CONDITIONAL_VARIANCE
        return ElementKind.VARIANCE_OF_CONDITIONAL_EXPECTATION


V_KIND = ElementKind.VARIANCE_OF_CONDITIONAL_EXPECTATION
E_KIND = ElementKind.EXPECTATION_OF_CONDITIONAL_VARIANCE


class ConditionalElementTable:
    """Dense storage of (estimated or exact) conditional elements.

    values[mask] holds W_u for the subset encoded by `mask`; missing entries
    are NaN until set. The empty-set and full-set entries are pinned to 0 and
    var_y at construction and cannot be overwritten. `accuracies[mask]` records
    the per-subset accuracy N_u (0 = not recorded), and `cost_unit` the number
    kappa of model evaluations per elementary estimate (3 for double MC, 2 for
    pick-and-freeze, None for analytic tables).
    """

    def __init__(self, kind: ElementKind, p: int, var_y: float, cost_unit: int | None = None):
        self.p = check_dim(p)
        if not np.isfinite(var_y) or var_y <= 0:
            raise InvalidVarianceError(f"Var(Y) must be positive, got {var_y}")
        if cost_unit is not None and cost_unit not in (2, 3):
            raise ValueError(f"cost_unit must be 2 or 3, got {cost_unit}")
        self.kind = kind
        self.var_y = float(var_y)
        self.cost_unit = cost_unit
        self.values = np.full(1 << p, np.nan)
        self.accuracies = np.zeros(1 << p, dtype=np.int64)
        self.values[0] = 0.0
        self.values[full_mask(p)] = self.var_y

    @classmethod
    def from_values(
        cls,
        kind: ElementKind,
        p: int,
        var_y: float,
        values,
        cost_unit: int | None = None,
    ) -> "ConditionalElementTable":
        """Build a table from a dense array or a {subset: value} mapping."""
        table = cls(kind, p, var_y, cost_unit)
        if isinstance(values, dict):
            for u, w in values.items():
                table.set_value(u, w)
        else:
            values = np.asarray(values, dtype=float)
            if values.shape != table.values.shape:
                raise SubsetError(
                    f"expected {table.values.shape[0]} values, got {values.shape}"
                )
            table.values[1:-1] = values[1:-1]
        return table

    def set_value(self, u, value: float, accuracy: int = 0) -> None:
        mask = as_mask(u, self.p)
        if mask == 0 or mask == full_mask(self.p):
            raise SubsetError("the empty-set and full-set entries are pinned")
        self.values[mask] = float(value)
        if accuracy:
            self.accuracies[mask] = int(accuracy)

    def value(self, u) -> float:
        mask = as_mask(u, self.p)
        w = self.values[mask]
        if np.isnan(w):
            raise IncompleteTableError(f"no entry for subset mask {mask}")
        return float(w)

    def is_complete(self) -> bool:
        return not np.isnan(self.values).any()

    def require_complete(self) -> None:
        missing = np.flatnonzero(np.isnan(self.values))
        if missing.size:
            raise IncompleteTableError(
                f"table is missing {missing.size} subset entries "
                f"(first missing mask: {int(missing[0])})"
            )

    def copy(self) -> "ConditionalElementTable":
        out = ConditionalElementTable(self.kind, self.p, self.var_y, self.cost_unit)
        out.values = self.values.copy()
        out.accuracies = self.accuracies.copy()
        return out

    def as_dict(self) -> dict:
        return {
            SubsetIndex(m, self.p): float(self.values[m])
            for m in range(1 << self.p)
            if not np.isnan(self.values[m])
        }

    def __repr__(self):
        filled = int((~np.isnan(self.values)).sum())
        return (
            f"ConditionalElementTable(kind={self.kind.value}, p={self.p}, "
            f"var_y={self.var_y:g}, {filled}/{1 << self.p} entries)"
        )


@dataclass(frozen=True)
class Permutation:
    """An ordering of the p variables (each 0-based index exactly once)."""

    order: tuple

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        object.__setattr__(self, "order", order)
        if sorted(order) != list(range(len(order))):
            raise ValueError(f"not a permutation of 0..{len(order) - 1}: {order}")

    @property
    def p(self) -> int:
        return len(self.order)

    def inverse(self) -> "Permutation":
        inv = [0] * self.p
        for pos, var in enumerate(self.order):
            inv[var] = pos
        return Permutation(tuple(inv))

    def predecessors_mask(self, position: int) -> int:
        """Mask of the variables placed strictly before `position`."""
        mask = 0
        for j in range(position):
            mask |= 1 << self.order[j]
        return mask

    def __iter__(self):
        return iter(self.order)

    def __len__(self):
        return len(self.order)


class _AllPermutations:
    """Sentinel: aggregate over every permutation of the p variables."""

    def __repr__(self):
        return "ALL_PERMUTATIONS"


ALL_PERMUTATIONS = _AllPermutations()


def shapley_from_subsets(table: ConditionalElementTable) -> np.ndarray:
    """Shapley effects by the subset-sum formula. Requires a complete table."""
    table.require_complete()
    p = table.p
    w = table.values
    sizes = popcounts(p)
    binom = binomial_row(p - 1) if p > 1 else np.ones(1)
    masks = np.arange(1 << p, dtype=np.int64)
    eta = np.empty(p)
    for i in range(p):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        weights = 1.0 / binom[sizes[without]]
        eta[i] = float(weights @ (w[without | bit] - w[without]))
    return eta / (p * table.var_y)


def shapley_from_permutations(table: ConditionalElementTable, perms=ALL_PERMUTATIONS) -> np.ndarray:
    """Shapley effects averaged over variable orderings.

    With `perms=ALL_PERMUTATIONS` this enumerates all p! orderings and equals
    shapley_from_subsets up to rounding. With an explicit list it returns the
    empirical average of the telescoping increments along each ordering.
    """
    table.require_complete()
    p = table.p
    if perms is ALL_PERMUTATIONS:
        iterator: Iterable[Sequence[int]] = itertools.permutations(range(p))
        count = _factorial(p)
    else:
        perms = list(perms)
        if not perms:
            raise ValueError("empty permutation list")
        iterator = [tuple(s.order if isinstance(s, Permutation) else s) for s in perms]
        for order in iterator:
            Permutation(tuple(order))
        count = len(perms)

    w = table.values
    acc = np.zeros(p)
    for order in iterator:
        prefix = 0
        prev = w[0]
        for var in order:
            nxt = prefix | (1 << var)
            cur = w[nxt]
            acc[var] += cur - prev
            prefix = nxt
            prev = cur
    return acc / (count * table.var_y)


def convert_table(table: ConditionalElementTable) -> ConditionalElementTable:
    """Switch a complete table to the other kind via V_u = Var(Y) - E_{-u}.

    The map is an involution up to floating rounding; accuracies follow their
    entries (the accuracy of V_u is that of the E_{-u} estimate it came from).
    """
    table.require_complete()
    p = table.p
    comp = np.arange(1 << p)[::-1].copy()  # mask ^ full == reversed index order
    out = ConditionalElementTable(table.kind.other, p, table.var_y, table.cost_unit)
    out.values = table.var_y - table.values[comp]
    out.accuracies = table.accuracies[comp]
    # re-pin the endpoints exactly
    out.values[0] = 0.0
    out.values[full_mask(p)] = table.var_y
    return out


def sobol_indices(table: ConditionalElementTable, convert: bool = False):
    """Closed and interaction Sobol indices from a complete V-table.

    Returns (s, s_closed), both dense arrays indexed by subset mask:
    s_closed[u] = V_u / Var(Y), and s[u] is the alternating subset sum
    sum_{v subset of u} (-1)^{|u|-|v|} V_v / Var(Y). An E-kind table is
    accepted only with convert=True (law of total variance).
    """
    if table.kind is not V_KIND:
        if not convert:
            raise TableKindError(
                "Sobol indices need a V-kind table; pass convert=True to convert"
            )
        table = convert_table(table)
    table.require_complete()
    p = table.p
    s_closed = table.values / table.var_y
    s = s_closed.copy()
    masks = np.arange(1 << p)
    # in-place Moebius transform over the subset lattice, one bit at a time
    for i in range(p):
        bit = 1 << i
        has = masks[(masks & bit) != 0]
        s[has] -= s[has ^ bit]
    return s, s_closed


def _factorial(p: int) -> int:
    out = 1
    for k in range(2, p + 1):
        out *= k
    return out
