"""Linear model of Gaussian inputs: closed-form oracle and exact samplers.

For X ~ N(mu, Gamma) and Y = beta' X, every conditional element is available
in closed form: Var(Y | X_u) is constant in the conditioning value and equals
beta_{-u}' S beta_{-u} with S the Schur complement of Gamma_{uu}. That yields
exact E-tables, V-tables and Shapley effects, which the estimation stack is
validated against. The model also implements the batched InputModel protocol
(marginal and conditional Gaussian samplers), so every exact-mode estimator
can run on it.

Near-singular conditioning blocks are handled with a symmetric-eigenvalue
pseudo-inverse (relative cutoff 1e-10); blocks with genuinely negative
eigenvalues are rejected.
"""

from __future__ import annotations

import numpy as np

from . import core
from .errors import ConfigurationError, InvalidVarianceError, SingularCovarianceError
from .exact import EvalBudget
from .subsets import as_mask, check_dim, full_mask, mask_indices

_PINV_RELATIVE_CUTOFF = 1e-10
_PSD_TOLERANCE = 1e-8


def random_spd_covariance(p: int, rng) -> np.ndarray:
    """Gamma = A'A with A a p x p matrix of i.i.d. standard normals."""
    check_dim(p)
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    a = rng.standard_normal((p, p))
    return a.T @ a


def _pinv_psd(a: np.ndarray) -> np.ndarray:
    """Pseudo-inverse of a symmetric PSD matrix, rejecting indefinite input."""
    if a.shape[0] == 0:
        return a
    w, v = np.linalg.eigh(a)
    scale = max(float(w[-1]), 0.0)
    if w[0] < -_PSD_TOLERANCE * max(scale, 1.0):
        raise SingularCovarianceError(
            f"conditioning block is not positive semi-definite (min eigenvalue {w[0]:.3e})"
        )
    keep = w > _PINV_RELATIVE_CUTOFF * max(scale, np.finfo(float).tiny)
    inv_w = np.zeros_like(w)
    inv_w[keep] = 1.0 / w[keep]
    return (v * inv_w) @ v.T


def _psd_factor(a: np.ndarray) -> np.ndarray:
    """A factor L with L L' = a, for sampling from N(0, a); a may be singular."""
    if a.shape[0] == 0:
        return a
    w, v = np.linalg.eigh(a)
    scale = max(float(w[-1]), 0.0)
    if w[0] < -_PSD_TOLERANCE * max(scale, 1.0):
        raise SingularCovarianceError(
            f"covariance block is not positive semi-definite (min eigenvalue {w[0]:.3e})"
        )
    return v * np.sqrt(np.clip(w, 0.0, None))


class LinearGaussianModel:
    """Y = beta' X with X ~ N(mu, Gamma); implements the InputModel protocol."""

    def __init__(self, beta, mu=None, gamma=None, budget: EvalBudget | None = None):
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        p = check_dim(beta.shape[0])
        if mu is None:
            mu = np.zeros(p)
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if gamma is None:
            gamma = np.eye(p)
        gamma = np.asarray(gamma, dtype=float)
        if mu.shape != (p,) or gamma.shape != (p, p):
            raise ConfigurationError(
                f"inconsistent shapes: beta {beta.shape}, mu {mu.shape}, gamma {gamma.shape}"
            )
        if not np.allclose(gamma, gamma.T, atol=1e-12, rtol=0.0):
            raise ConfigurationError("covariance matrix must be symmetric (tolerance 1e-12)")
        eigenvalues = np.linalg.eigvalsh(gamma)
        if eigenvalues[0] < -_PSD_TOLERANCE * max(float(eigenvalues[-1]), 1.0):
            raise SingularCovarianceError(
                f"covariance matrix is not positive semi-definite "
                f"(min eigenvalue {eigenvalues[0]:.3e})"
            )
        self.p = p
        self.beta = beta
        self.mu = mu
        self.gamma = 0.5 * (gamma + gamma.T)
        self.budget = budget if budget is not None else EvalBudget()
        var_y = float(beta @ self.gamma @ beta)
        if var_y <= 0:
            raise InvalidVarianceError(f"Var(Y) = beta' Gamma beta = {var_y:g} must be positive")
        self._var_y = var_y
        self._cond_cache: dict = {}
        self._factor_cache: dict = {}
        self._condvar_cache: dict = {}

    @property
    def mean_y(self) -> float:
        return float(self.beta @ self.mu)

    @property
    def var_y(self) -> float:
        return self._var_y

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.p:
            raise ValueError(f"expected an (n, {self.p}) batch of points, got {x.shape}")
        self.budget.charge(x.shape[0])
        return x @ self.beta

    # -- sampling -----------------------------------------------------------

    def sample_marginal(self, v_mask, n: int, rng: np.random.Generator) -> np.ndarray:
        mask = as_mask(v_mask, self.p)
        idx = mask_indices(mask)
        if idx.size == 0:
            return np.empty((n, 0))
        factor = self._marginal_factor(mask)
        z = rng.standard_normal((n, idx.size))
        return self.mu[idx] + z @ factor.T

    def sample_conditional(
        self, target_mask, given_mask, given_values, n: int, rng: np.random.Generator
    ) -> np.ndarray:
        t_mask = as_mask(target_mask, self.p)
        v_mask = as_mask(given_mask, self.p)
        if t_mask & v_mask:
            raise ValueError("target and conditioning subsets must be disjoint")
        t_idx = mask_indices(t_mask)
        given_values = np.asarray(given_values, dtype=float)
        if given_values.ndim != 2:
            raise ValueError("given_values must be (m, |given|)")
        m = given_values.shape[0]
        if v_mask == 0:
            draws = self.sample_marginal(t_mask, m * n, rng)
            return draws.reshape(m, n, t_idx.size)
        reg, factor = self._conditioning(t_mask, v_mask)
        v_idx = mask_indices(v_mask)
        cond_mean = self.mu[t_idx] + (given_values - self.mu[v_idx]) @ reg.T  # (m, |t|)
        z = rng.standard_normal((m, n, t_idx.size))
        return cond_mean[:, None, :] + z @ factor.T

    # -- closed-form conditional elements ------------------------------------

    def conditional_variance(self, u) -> float:
        """Var(Y | X_u), constant in the conditioning value.

        Equals E_{-u}; V_u = Var(Y) - conditional_variance(u).
        """
        mask = as_mask(u, self.p)
        cached = self._condvar_cache.get(mask)
        if cached is not None:
            return cached
        if mask == 0:
            value = self.var_y
        elif mask == full_mask(self.p):
            value = 0.0
        else:
            comp = mask ^ full_mask(self.p)
            c_idx = mask_indices(comp)
            schur = self._schur(comp, mask)
            b = self.beta[c_idx]
            value = float(b @ schur @ b)
        self._condvar_cache[mask] = value
        return value

    def e_table(self) -> core.ConditionalElementTable:
        """Exact table of E_u = E(Var(Y|X_{-u})) over all subsets."""
        p = self.p
        table = core.ConditionalElementTable(core.E_KIND, p, self.var_y)
        for mask in range(1, full_mask(p)):
            table.set_value(mask, self.conditional_variance(mask ^ full_mask(p)))
        return table

    def v_table(self) -> core.ConditionalElementTable:
        """Exact table of V_u = Var(E(Y|X_u)) over all subsets."""
        p = self.p
        table = core.ConditionalElementTable(core.V_KIND, p, self.var_y)
        for mask in range(1, full_mask(p)):
            table.set_value(mask, self.var_y - self.conditional_variance(mask))
        return table

    def theoretical_shapley(self) -> np.ndarray:
        return core.shapley_from_subsets(self.v_table())

    # -- cached linear algebra ------------------------------------------------

    def _marginal_factor(self, mask: int) -> np.ndarray:
        factor = self._factor_cache.get(mask)
        if factor is None:
            idx = mask_indices(mask)
            factor = _psd_factor(self.gamma[np.ix_(idx, idx)])
            self._factor_cache[mask] = factor
        return factor

    def _schur(self, t_mask: int, v_mask: int) -> np.ndarray:
        """Gamma_tt - Gamma_tv Gamma_vv^+ Gamma_vt."""
        t_idx = mask_indices(t_mask)
        v_idx = mask_indices(v_mask)
        g_tt = self.gamma[np.ix_(t_idx, t_idx)]
        g_tv = self.gamma[np.ix_(t_idx, v_idx)]
        g_vv = self.gamma[np.ix_(v_idx, v_idx)]
        return g_tt - g_tv @ _pinv_psd(g_vv) @ g_tv.T

    def _conditioning(self, t_mask: int, v_mask: int):
        """Regression matrix Gamma_tv Gamma_vv^+ and a factor of the Schur complement."""
        key = (t_mask, v_mask)
        cached = self._cond_cache.get(key)
        if cached is not None:
            return cached
        t_idx = mask_indices(t_mask)
        v_idx = mask_indices(v_mask)
        g_tv = self.gamma[np.ix_(t_idx, v_idx)]
        reg = g_tv @ _pinv_psd(self.gamma[np.ix_(v_idx, v_idx)])
        factor = _psd_factor(self._schur(t_mask, v_mask))
        self._cond_cache[key] = (reg, factor)
        return reg, factor


def load_gaussian_config(path) -> LinearGaussianModel:
    """Build a LinearGaussianModel from a TOML key-value file.

    Recognized keys: `beta` (list, or scalar together with `p`), `mu` (list or
    scalar, default 0), and exactly one of `gamma` (nested list) or
    `gamma_seed` (int, generating A'A with seeded standard-normal A).
    """
    import tomli

    with open(path, "rb") as fh:
        raw = tomli.load(fh)
    unknown = set(raw) - {"p", "beta", "mu", "gamma", "gamma_seed"}
    if unknown:
        raise ConfigurationError(f"unknown keys in {path}: {sorted(unknown)}")
    if "beta" not in raw:
        raise ConfigurationError(f"{path}: missing required key 'beta'")
    beta = raw["beta"]
    if np.isscalar(beta):
        if "p" not in raw:
            raise ConfigurationError(f"{path}: scalar beta needs an explicit 'p'")
        beta = [float(beta)] * int(raw["p"])
    beta = np.asarray(beta, dtype=float)
    p = beta.shape[0]
    if "p" in raw and int(raw["p"]) != p:
        raise ConfigurationError(f"{path}: p={raw['p']} inconsistent with beta of length {p}")
    mu = raw.get("mu", 0.0)
    if np.isscalar(mu):
        mu = [float(mu)] * p
    if ("gamma" in raw) == ("gamma_seed" in raw):
        raise ConfigurationError(f"{path}: provide exactly one of 'gamma' or 'gamma_seed'")
    if "gamma" in raw:
        gamma = np.asarray(raw["gamma"], dtype=float)
    else:
        gamma = random_spd_covariance(p, np.random.default_rng(int(raw["gamma_seed"])))
    try:
        return LinearGaussianModel(beta, mu, gamma)
    except (InvalidVarianceError, ConfigurationError) as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
