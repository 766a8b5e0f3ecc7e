"""Given-data estimators: nearest neighbours replace exact conditional draws.

When only an i.i.d. sample of X is observed, a conditional draw of X given
X_v = x_v is approximated by the rows whose v-coordinates are nearest to x_v.
Distance is the maximum of per-coordinate distances: absolute difference on
continuous columns (scaled by the sample standard deviation by default, so no
column dominates on heterogeneous data) and the 0/1 discrete metric on
categorical columns. Neighbour ranks are broken uniformly at random among
equal distances, and the returned indices are pairwise distinct; with all
distances distinct, every row is its own first neighbour.

Each exact-mode estimator has two given-data versions: "mix" re-evaluates the
model at recombined points (cost = model evaluations), while "knn" only reads
the stored outputs column (zero model evaluations).
"""

from __future__ import annotations

from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .errors import DataError, EstimatorError, InvalidVarianceError
from .exact import WEstimate
from .subsets import as_mask, check_dim, full_mask, mask_indices

# linear-scan distance matrices are processed in chunks of at most this many cells
_CHUNK_CELLS = 2_000_000
# extra neighbours fetched up front so ties at the cut are usually already visible
_TIE_PAD = 4


class ColumnKind(Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"


class DataSample:
    """N observed rows of X, with optional precomputed outputs f(X).

    `data` is an (N, p) float array; categorical columns hold integer label
    codes. Neighbour indexes built on this sample are cached per coordinate
    subset, so repeated queries against the same conditioning subset are cheap.
    """

    def __init__(
        self,
        data,
        kinds=None,
        outputs=None,
        names=None,
        categories=None,
        standardize: bool = True,
    ):
        data = np.asarray(data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 1:
            raise DataError(f"expected a nonempty (N, p) array, got shape {data.shape}")
        check_dim(data.shape[1])
        self.data = data
        n, p = data.shape
        if kinds is None:
            kinds = (ColumnKind.CONTINUOUS,) * p
        kinds = tuple(kinds)
        if len(kinds) != p or not all(isinstance(k, ColumnKind) for k in kinds):
            raise DataError("kinds must list one ColumnKind per column")
        self.kinds = kinds
        if outputs is not None:
            outputs = np.asarray(outputs, dtype=float)
            if outputs.shape != (n,):
                raise DataError(f"outputs must have shape ({n},), got {outputs.shape}")
        self.outputs = outputs
        self.names = tuple(names) if names is not None else tuple(f"x{i + 1}" for i in range(p))
        if len(self.names) != p:
            raise DataError("names must list one name per column")
        self.categories = dict(categories) if categories else {}
        self.standardize = bool(standardize)
        self._scale_cache = None
        self._index_cache: dict = {}

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    @property
    def mean_y(self) -> float:
        return float(self._require_outputs().mean())

    @property
    def var_y(self) -> float:
        out = self._require_outputs()
        if out.shape[0] < 2:
            raise DataError("need at least two rows to estimate Var(Y)")
        return float(out.var(ddof=1))

    def column_scales(self) -> np.ndarray:
        """Per-column divisor used by the distance metric (1.0 when disabled)."""
        if self._scale_cache is None:
            scales = np.ones(self.p)
            if self.standardize and self.n >= 2:
                for j, kind in enumerate(self.kinds):
                    if kind is ColumnKind.CONTINUOUS:
                        s = float(self.data[:, j].std(ddof=1))
                        if s > 0:
                            scales[j] = s
            self._scale_cache = scales
        return self._scale_cache

    def knn_index(self, v_mask) -> "KnnIndex":
        mask = as_mask(v_mask, self.p)
        index = self._index_cache.get(mask)
        if index is None:
            index = build_knn_index(self, mask)
            self._index_cache[mask] = index
        return index

    def _require_outputs(self) -> np.ndarray:
        if self.outputs is None:
            raise DataError("this operation needs the precomputed outputs column")
        return self.outputs


def build_knn_index(sample: DataSample, v) -> "KnnIndex":
    """Exact nearest-neighbour index on the coordinates in v.

    Uses a kd-tree when v has at least two continuous coordinates and no
    categorical ones; otherwise a chunked linear scan (the mixed metric breaks
    tree pruning on categorical coordinates).
    """
    return KnnIndex(sample, as_mask(v, sample.p))


class KnnIndex:
    def __init__(self, sample: DataSample, v_mask: int):
        if v_mask == 0:
            raise DataError("cannot build a neighbour index on an empty coordinate set")
        self.v_mask = v_mask
        cols = mask_indices(v_mask)
        kinds = [sample.kinds[j] for j in cols]
        scales = sample.column_scales()
        cont_cols = [j for j, k in zip(cols, kinds) if k is ColumnKind.CONTINUOUS]
        cat_cols = [j for j, k in zip(cols, kinds) if k is ColumnKind.CATEGORICAL]
        self._cont = sample.data[:, cont_cols] / scales[cont_cols] if cont_cols else None
        self._cat = sample.data[:, cat_cols] if cat_cols else None
        self._n = sample.n
        self._tree = None
        if self._cat is None and self._cont is not None:
            # categorical coordinates break tree pruning, so they fall back to
            # the scan path; cheap construction wins here because typical use
            # builds one tree per conditioning subset and runs only a few
            # hundred queries on each
            self._tree = cKDTree(self._cont, balanced_tree=False, compact_nodes=False)

    @property
    def n(self) -> int:
        return self._n

    def query(self, anchor_rows, k: int, rng: np.random.Generator) -> np.ndarray:
        """Indices of the k nearest rows to each anchor row (the anchor counts).

        Returns an (m, k) array of pairwise-distinct row indices per anchor,
        ordered by distance with uniform random rank assignment among ties.
        """
        anchor_rows = np.asarray(anchor_rows, dtype=np.intp).reshape(-1)
        k = int(k)
        if k < 1 or k > self._n:
            raise EstimatorError(f"need 1 <= k <= N rows, got k={k} with N={self._n}")
        if anchor_rows.size and (anchor_rows.min() < 0 or anchor_rows.max() >= self._n):
            raise EstimatorError("anchor row index out of range")
        if self._tree is not None:
            return self._query_tree(anchor_rows, k, rng)
        return self._query_scan(anchor_rows, k, rng)

    # -- kd-tree path (all-continuous, >= 2 columns) -------------------------

    def _query_tree(self, anchor_rows, k, rng):
        pts = self._cont[anchor_rows]
        kq = min(self._n, k + _TIE_PAD)
        dist, idx = self._tree.query(pts, k=kq, p=np.inf)
        dist = dist.reshape(len(anchor_rows), kq)
        idx = idx.reshape(len(anchor_rows), kq)
        out = idx[:, :k].copy()
        # rows whose first k+1 sorted distances contain a repeat need tie handling
        upto = min(k + 1, kq)
        care = (dist[:, 1:upto] == dist[:, : upto - 1]).any(axis=1)
        for row in np.flatnonzero(care):
            boundary = dist[row, k - 1]
            candidates = np.asarray(
                self._tree.query_ball_point(pts[row], r=boundary, p=np.inf), dtype=np.intp
            )
            if candidates.size < k:  # floating quirk; fall back to the fetched window
                candidates = idx[row]
            d = np.abs(self._cont[candidates] - pts[row]).max(axis=1)
            out[row] = _ranked_with_uniform_ties(candidates, d, k, rng)
        return out

    # -- linear-scan path (categorical / mixed / single column) --------------

    def _query_scan(self, anchor_rows, k, rng):
        m = anchor_rows.size
        out = np.empty((m, k), dtype=np.intp)
        chunk = max(1, _CHUNK_CELLS // self._n)
        kq = min(self._n, k + _TIE_PAD)
        for start in range(0, m, chunk):
            rows = anchor_rows[start : start + chunk]
            d = self._distances(rows)
            if kq < self._n:
                cand = np.argpartition(d, kq - 1, axis=1)[:, :kq]
            else:
                cand = np.broadcast_to(np.arange(self._n), (rows.size, self._n))
            cand_d = np.take_along_axis(d, cand, axis=1)
            order = np.argsort(cand_d, axis=1, kind="stable")
            cand_sorted = np.take_along_axis(cand, order, axis=1)
            d_sorted = np.take_along_axis(cand_d, order, axis=1)
            block = cand_sorted[:, :k].copy()
            # rows with equal distances among the first k+1 need uniform ranks
            upto = min(k + 1, kq)
            care = (d_sorted[:, 1:upto] == d_sorted[:, : upto - 1]).any(axis=1)
            for i in np.flatnonzero(care):
                boundary = d_sorted[i, k - 1]
                members = np.flatnonzero(d[i] <= boundary)
                block[i] = _ranked_with_uniform_ties(members, d[i][members], k, rng)
            out[start : start + rows.size] = block
        return out

    def _distances(self, anchor_rows) -> np.ndarray:
        """Max-metric distances from each anchor row to all rows, (m, N)."""
        d = None
        if self._cont is not None:
            diff = np.abs(self._cont[anchor_rows][:, None, :] - self._cont[None, :, :])
            d = diff.max(axis=2)
        if self._cat is not None:
            mism = (self._cat[anchor_rows][:, None, :] != self._cat[None, :, :]).any(axis=2)
            d = mism.astype(float) if d is None else np.maximum(d, mism)
        return d


def _ranked_with_uniform_ties(candidates, distances, k, rng):
    """First k candidate indices by distance, ranks uniform among equal distances."""
    perm = rng.permutation(candidates.size)
    order = np.argsort(distances[perm], kind="stable")
    return candidates[perm[order[:k]]]


# -- anchor subsampling -------------------------------------------------------


def draw_anchor_rows(sample: DataSample, n_u: int, replacement, rng) -> np.ndarray:
    """The anchor rows s(1..N_u): uniform on the sample, with or without replacement.

    Default policy: without replacement while n_u <= N, with replacement
    otherwise. Asking for more anchors than rows without replacement is an
    error.
    """
    n = sample.n
    n_u = int(n_u)
    if n_u < 1:
        raise EstimatorError(f"need at least one anchor, got {n_u}")
    if replacement is None:
        replacement = n_u > n
    if replacement:
        return rng.integers(0, n, size=n_u)
    if n_u > n:
        raise EstimatorError(f"cannot draw {n_u} anchors from {n} rows without replacement")
    return rng.permutation(n)[:n_u]


# -- double Monte-Carlo -------------------------------------------------------


def _check_mc_subset(u, p, allow_empty):
    mask = as_mask(u, p)
    if mask == full_mask(p):
        raise EstimatorError("u must leave at least one conditioning coordinate")
    if mask == 0 and not allow_empty:
        raise EstimatorError("u must be nonempty for the mix variant")
    return mask


def per_anchor_Eu_mc_mix(sample, model, u, anchor_rows, n_inner, rng):
    """Elementary mix double-MC estimates at the given anchors, (m,) values.

    Each value costs n_inner model evaluations: the anchor keeps its observed
    X_{-u} block while X_u is borrowed from the n_inner nearest rows in the
    -u coordinates.
    """
    p = sample.p
    mask = _check_mc_subset(u, p, allow_empty=False)
    if n_inner < 2:
        raise EstimatorError(f"inner sample size must be >= 2, got {n_inner}")
    if model is None:
        raise EstimatorError("the mix variant needs an evaluable model")
    comp = mask ^ full_mask(p)
    neigh = sample.knn_index(comp).query(anchor_rows, n_inner, rng)  # (m, n_inner)
    u_idx = mask_indices(mask)
    c_idx = mask_indices(comp)
    points = np.empty((len(anchor_rows), n_inner, p))
    points[..., c_idx] = sample.data[np.asarray(anchor_rows), :][:, None, c_idx]
    points[..., u_idx] = sample.data[neigh][:, :, u_idx]
    y = model.evaluate(points.reshape(-1, p)).reshape(len(anchor_rows), n_inner)
    return y.var(axis=1, ddof=1)


def per_anchor_Eu_mc_knn(sample, u, anchor_rows, n_inner, rng):
    """Elementary knn double-MC estimates at the given anchors; no evaluations.

    The sample variance is taken over the stored outputs of the n_inner
    nearest rows in the -u coordinates. u may be empty (conditioning on all
    coordinates), which estimates E(Var(Y|X)).
    """
    mask = _check_mc_subset(u, sample.p, allow_empty=True)
    if n_inner < 2:
        raise EstimatorError(f"inner sample size must be >= 2, got {n_inner}")
    outputs = sample._require_outputs()
    comp = mask ^ full_mask(sample.p)
    neigh = sample.knn_index(comp).query(anchor_rows, n_inner, rng)
    return outputs[neigh].var(axis=1, ddof=1)


def estimate_Eu_mc_mix(
    sample, model, u, n_u, n_inner=3, replacement=None, rng=None, anchor_rows=None
) -> WEstimate:
    """Mix-variant double-MC estimate of E_u; cost n_inner * n_u evaluations."""
    rng = _require_rng(rng)
    if anchor_rows is None:
        anchor_rows = draw_anchor_rows(sample, n_u, replacement, rng)
    values = per_anchor_Eu_mc_mix(sample, model, u, anchor_rows, n_inner, rng)
    return WEstimate(float(values.mean()), int(len(anchor_rows)) * int(n_inner))


def estimate_Eu_mc_knn(
    sample, u, n_u, n_inner=3, replacement=None, rng=None, anchor_rows=None
) -> WEstimate:
    """Knn-variant double-MC estimate of E_u; zero model evaluations."""
    rng = _require_rng(rng)
    if anchor_rows is None:
        anchor_rows = draw_anchor_rows(sample, n_u, replacement, rng)
    values = per_anchor_Eu_mc_knn(sample, u, anchor_rows, n_inner, rng)
    return WEstimate(float(values.mean()), 0)


# -- pick-and-freeze ----------------------------------------------------------


def _check_pf_subset(u, p):
    mask = as_mask(u, p)
    if mask == 0 or mask == full_mask(p):
        raise EstimatorError("pick-and-freeze needs a nonempty proper subset")
    return mask


def per_anchor_Vu_pf_mix(sample, model, u, anchor_rows, rng, mean_y):
    """Elementary mix pick-and-freeze estimates, (m,) values, 2 evaluations each.

    For each anchor, the two nearest rows in the u coordinates supply the
    frozen pair: f at the first row, times f at the recombination (u block
    from the first row, -u block from the second).
    """
    p = sample.p
    mask = _check_pf_subset(u, p)
    if model is None:
        raise EstimatorError("the mix variant needs an evaluable model")
    comp = mask ^ full_mask(p)
    neigh = sample.knn_index(mask).query(anchor_rows, 2, rng)  # (m, 2)
    u_idx = mask_indices(mask)
    c_idx = mask_indices(comp)
    first = sample.data[neigh[:, 0]]
    recombined = np.empty((len(anchor_rows), p))
    recombined[:, u_idx] = first[:, u_idx]
    recombined[:, c_idx] = sample.data[neigh[:, 1]][:, c_idx]
    y1 = model.evaluate(first)
    y2 = model.evaluate(recombined)
    return y1 * y2 - float(mean_y) ** 2


def per_anchor_Vu_pf_knn(sample, u, anchor_rows, rng, mean_y):
    """Elementary knn pick-and-freeze estimates; both factors read from outputs."""
    mask = _check_pf_subset(u, sample.p)
    outputs = sample._require_outputs()
    neigh = sample.knn_index(mask).query(anchor_rows, 2, rng)
    return outputs[neigh[:, 0]] * outputs[neigh[:, 1]] - float(mean_y) ** 2


def estimate_Vu_pf_mix(
    sample, model, u, n_u, replacement=None, rng=None, mean_y=None, anchor_rows=None
) -> WEstimate:
    """Mix-variant pick-and-freeze estimate of V_u; cost 2 * n_u evaluations."""
    rng = _require_rng(rng)
    mean_y = sample.mean_y if mean_y is None else mean_y
    if anchor_rows is None:
        anchor_rows = draw_anchor_rows(sample, n_u, replacement, rng)
    values = per_anchor_Vu_pf_mix(sample, model, u, anchor_rows, rng, mean_y)
    return WEstimate(float(values.mean()), 2 * int(len(anchor_rows)))


def estimate_Vu_pf_knn(
    sample, u, n_u, replacement=None, rng=None, mean_y=None, anchor_rows=None
) -> WEstimate:
    """Knn-variant pick-and-freeze estimate of V_u; zero model evaluations."""
    rng = _require_rng(rng)
    mean_y = sample.mean_y if mean_y is None else mean_y
    if anchor_rows is None:
        anchor_rows = draw_anchor_rows(sample, n_u, replacement, rng)
    values = per_anchor_Vu_pf_knn(sample, u, anchor_rows, rng, mean_y)
    return WEstimate(float(values.mean()), 0)


# -- model-fit diagnostic -----------------------------------------------------


def explained_variance_ratio(sample, n_anchor=1000, n_inner=3, rng=None, replacement=None):
    """Estimate Var(E(Y|X)) / Var(Y) from the sample alone.

    Uses the knn double-MC estimate of E(Var(Y|X)) with neighbours in all p
    coordinates. Near 1 when the outputs are a deterministic (smooth) function
    of X; near 0 when they are independent noise. Reported unclipped, so
    estimation noise may push it slightly outside [0, 1].
    """
    rng = _require_rng(rng)
    out_var = sample.var_y
    if out_var <= 0:
        raise InvalidVarianceError("outputs have zero variance; ratio undefined")
    n_anchor = min(int(n_anchor), sample.n) if replacement is None else int(n_anchor)
    anchors = draw_anchor_rows(sample, n_anchor, replacement, rng)
    e_empty = per_anchor_Eu_mc_knn(sample, 0, anchors, n_inner, rng).mean()
    return 1.0 - float(e_empty) / out_var


def _require_rng(rng) -> np.random.Generator:
    if not isinstance(rng, np.random.Generator):
        raise EstimatorError("an explicit numpy Generator rng is required")
    return rng
