import numpy as np
import pytest

from shapeffects import LinearGaussianModel, random_spd_covariance
from shapeffects.util import rng_stream


@pytest.fixture
def bivariate_independent():
    """X ~ N(0, I_2), Y = X_1 + X_2."""
    return LinearGaussianModel([1.0, 1.0])


@pytest.fixture
def bivariate_correlated():
    """X ~ N(0, [[1, .5], [.5, 1]]), Y = X_1 + X_2: E_1 = 0.75, V_1 = 2.25."""
    return LinearGaussianModel([1.0, 1.0], gamma=[[1.0, 0.5], [0.5, 1.0]])


@pytest.fixture
def p3_model():
    """p=3 linear model with a seeded random SPD covariance."""
    gamma = random_spd_covariance(3, rng_stream(202, "gamma"))
    return LinearGaussianModel([1.0, 2.0, 3.0], mu=[0.5, -1.0, 2.0], gamma=gamma)


def random_complete_table(kind, p, rng, var_y=None):
    """A complete conditional-element table with random proper-subset entries."""
    from shapeffects import ConditionalElementTable

    if var_y is None:
        var_y = float(rng.uniform(0.5, 4.0))
    table = ConditionalElementTable(kind, p, var_y)
    for mask in range(1, (1 << p) - 1):
        table.set_value(mask, float(rng.uniform(0.0, var_y)))
    return table


def naive_shapley_by_permutations(w: dict, p: int, var_y: float) -> np.ndarray:
    """Independent reference: plain-python average over all p! orderings."""
    import itertools

    eta = np.zeros(p)
    count = 0
    for order in itertools.permutations(range(p)):
        prefix = frozenset()
        for var in order:
            nxt = prefix | {var}
            eta[var] += w[nxt] - w[prefix]
            prefix = nxt
        count += 1
    return eta / (count * var_y)


def table_as_setdict(table) -> dict:
    """Dense table values re-keyed by frozenset, for the naive oracles."""
    out = {}
    for mask in range(1 << table.p):
        members = frozenset(i for i in range(table.p) if mask >> i & 1)
        out[members] = float(table.values[mask])
    return out
