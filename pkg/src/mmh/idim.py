"""Variance-based intrinsic dimension and the local GMST estimator.

A point's local dimension is the smallest of the set dimensions ``d_vid``
over a ladder of neighborhoods around it, counting only neighborhoods with
more than ``c`` members. ``None`` stands for an undefined dimension.
"""

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_cloud
from .core import center_and_svd
from .errors import ManifoldTestError
from .neighborhoods import NeighborhoodSpec, NeighborIndex

__all__ = [
    "IdParams",
    "LocalIdRecord",
    "Strata",
    "GmstFit",
    "d_vid",
    "d_vlid",
    "compute_all_ids",
    "stratify",
    "diagnostic_encodings",
    "gmst_edge_length",
    "gmst_local_dimension",
]


@dataclass(frozen=True)
class IdParams:
    """Threshold ``t``, strict cutoff ``c`` and the neighborhood ladder."""

    t: float
    c: int
    spec: NeighborhoodSpec

    def __post_init__(self):
        if not 0.0 < float(self.t) <= 1.0:
            raise ManifoldTestError("bad-threshold", f"t={self.t} not in (0, 1]")
        if int(self.c) < 1:
            raise ManifoldTestError("bad-cutoff", f"c={self.c} < 1")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "c", int(self.c))

    def to_dict(self):
        return {"t": self.t, "c": self.c, "spec": self.spec.to_dict()}


@dataclass(frozen=True)
class LocalIdRecord:
    point_id: int
    dimension: int | None
    per_scale_dims: list
    argmin_scale_index: int | None
    energy: float


@dataclass
class Strata:
    groups: dict
    unclassified: np.ndarray

    def sizes(self):
        return {i: len(g) for i, g in sorted(self.groups.items())}

    @property
    def max_dimension(self):
        return max(self.groups) if self.groups else 0


@dataclass(frozen=True)
class GmstFit:
    point_id: int
    n_values: list
    edge_lengths: list
    a: float
    exponent: float
    d_est: float
    d_rounded: int
    clamped: bool = False
    residuals: list = field(default_factory=list)


def _dim_from_squares(sq, t):
    cum = np.cumsum(sq)
    total = cum[-1] if cum.size else 0.0
    if total <= 0.0:
        return 0
    return int(np.argmax(cum >= t * total)) + 1


def d_vid(points, t, c):
    """Smallest i whose leading i squared singular values reach ``t`` of the total.

    Returns ``None`` when the set has ``c`` or fewer points and 0 for a set
    with no variance at all.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if len(X) <= c:
        return None
    s = center_and_svd(X, compute_basis=False).singular_values
    return _dim_from_squares(s**2, t)


def _ladder_squares(X, members_per_scale, origin, method):
    """Squared singular values (rows, descending) of every neighborhood in a nested ladder.

    ``method="scatter"`` reads all scales off cumulative sums over the
    outermost neighborhood, with coordinates taken relative to ``origin`` to
    keep cancellation small; ``"svd"`` runs a separate SVD per scale.
    """
    D = X.shape[1]
    sizes = np.array([len(m) for m in members_per_scale])
    out = np.zeros((len(sizes), D))
    if method == "svd":
        for j, m in enumerate(members_per_scale):
            if len(m):
                s = center_and_svd(X[m], compute_basis=False).singular_values
                out[j, : len(s)] = s**2
        return out
    if method != "scatter":
        raise ManifoldTestError("bad-method", method)
    outer = members_per_scale[int(np.argmax(sizes))]
    if len(outer) == 0:
        return out
    Y = X[outer] - origin
    YY = (Y[:, :, None] * Y[:, None, :]).reshape(len(Y), D * D)
    cuts = np.unique(sizes[sizes > 0])
    starts = np.concatenate([[0], cuts[:-1]])
    s1 = np.cumsum(np.add.reduceat(Y, starts, axis=0), axis=0)
    s2 = np.cumsum(np.add.reduceat(YY, starts, axis=0), axis=0).reshape(-1, D, D)
    scatter = s2 - s1[:, :, None] * s1[:, None, :] / cuts[:, None, None]
    ev = np.maximum(np.linalg.eigvalsh(scatter)[:, ::-1], 0.0)
    pos = np.searchsorted(cuts, sizes)
    nonempty = sizes > 0
    out[nonempty] = ev[pos[nonempty]]
    return out


def _dims_from_square_rows(sq, t):
    cum = np.cumsum(sq, axis=1)
    total = cum[:, -1]
    dims = np.argmax(cum >= t * total[:, None], axis=1) + 1
    dims[total <= 0.0] = 0
    return dims


def _record(X, members_per_scale, params, point_id, origin, method):
    squares = _ladder_squares(X, members_per_scale, origin, method)
    dims = _dims_from_square_rows(squares, params.t)
    qualifies = np.array([len(m) > params.c for m in members_per_scale])
    per_scale = [
        (scale, int(d) if ok else None) for scale, d, ok in zip(params.spec.values, dims, qualifies)
    ]
    if not qualifies.any():
        return LocalIdRecord(point_id, None, per_scale, None, 0.0)
    masked = np.where(qualifies, dims, np.iinfo(np.int64).max)
    best_idx = int(np.argmin(masked))
    energy = float(np.mean(squares[qualifies].sum(axis=1)))
    return LocalIdRecord(point_id, int(dims[best_idx]), per_scale, best_idx, energy)


def d_vlid(cloud, p, params, *, index=None, method="scatter"):
    """Local dimension record for the point with index ``p``."""
    index = NeighborIndex(cloud) if index is None else index
    members = index.scale_members(int(p), params.spec)
    return _record(index.X, members, params, int(p), index.X[int(p)], method)


def _check_knn_counts(spec, n):
    if spec.kind == "knn-counts" and spec.values[-1] > n:
        raise ManifoldTestError("k-exceeds-cloud", f"k={spec.values[-1]} > {n} points")


def resolve_n_jobs(n_jobs=None):
    """Worker count; ``None`` reads MMH_THREADS (0 or unset means all cores)."""
    if n_jobs is None:
        n_jobs = int(os.environ.get("MMH_THREADS", "0") or 0)
    if n_jobs <= 0:
        n_jobs = os.cpu_count() or 1
    return n_jobs


def compute_all_ids(cloud, params, *, index=None, n_jobs=None, centers=None, method="scatter"):
    """One :class:`LocalIdRecord` per point, in index order.

    ``centers`` optionally gives query locations (rows) instead of the cloud's
    own points; the records then describe neighborhoods in ``cloud`` around
    those locations and ``point_id`` is the row number in ``centers``.
    """
    index = NeighborIndex(cloud) if index is None else index
    _check_knn_counts(params.spec, len(index))
    X = index.X
    if centers is None:
        queries = range(len(X))
    else:
        queries = check_cloud(centers)

    def work(chunk):
        out = []
        for i in chunk:
            q = i if centers is None else queries[i]
            members = index.scale_members(q, params.spec)
            origin = X[i] if centers is None else queries[i]
            out.append(_record(X, members, params, int(i), origin, method))
        return out

    n = len(queries)
    workers = min(resolve_n_jobs(n_jobs), max(n, 1))
    if workers == 1:
        return work(range(n))
    chunks = np.array_split(np.arange(n), workers * 4)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(work, chunks))
    return [r for part in parts for r in part]


def stratify(records):
    """Group point ids by local dimension; undefined points go to ``unclassified``."""
    if len(records) == 0:
        raise ManifoldTestError("empty-set", "no records to stratify")
    groups = {}
    unclassified = []
    for r in records:
        if r.dimension is None:
            unclassified.append(r.point_id)
        else:
            groups.setdefault(int(r.dimension), []).append(r.point_id)
    return Strata(
        groups={k: np.asarray(v, dtype=np.intp) for k, v in sorted(groups.items())},
        unclassified=np.asarray(unclassified, dtype=np.intp),
    )


def diagnostic_encodings(records, spec):
    """Per-point ``(lex_code, energy)`` arrays for color-coded plots.

    ``lex_code = dimension * len(spec) - argmin_scale_index`` orders points by
    dimension first and, within a dimension, by the finest scale at which the
    minimum was reached. Undefined points get ``(-1, 0)``.
    """
    m = len(spec)
    lex = np.empty(len(records), dtype=np.int64)
    energy = np.empty(len(records), dtype=float)
    for k, r in enumerate(records):
        if r.dimension is None:
            lex[k], energy[k] = -1, 0.0
        else:
            lex[k] = r.dimension * m - r.argmin_scale_index
            energy[k] = r.energy
    return lex, energy


def records_to_arrays(records):
    dims = np.array([-1 if r.dimension is None else r.dimension for r in records], dtype=np.int64)
    return dims


# --- local GMST --------------------------------------------------------------


def _knn_graph_length(Y, k, gamma):
    diff = Y[:, None, :] - Y[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    nearest = np.partition(d2, k - 1, axis=1)[:, :k]
    return float(np.sum(nearest ** (gamma / 2.0)))


def gmst_edge_length(cloud, members, k, gamma):
    """Total ``gamma``-weighted edge length of the kNN graph on ``members``.

    Each member contributes the distances to its k nearest other members.
    """
    X = check_cloud(cloud)
    members = np.asarray(members, dtype=np.intp)
    k = int(k)
    if gamma <= 0:
        raise ManifoldTestError("bad-gamma", f"gamma={gamma} must be > 0")
    if k < 1 or k >= len(members):
        raise ManifoldTestError(
            "k-exceeds-neighborhood", f"k={k} needs more than {len(members)} members"
        )
    return _knn_graph_length(X[members], k, gamma)


def _fit_growth(n_values, lengths):
    logn = np.log(np.asarray(n_values, dtype=float))
    logl = np.log(np.asarray(lengths, dtype=float))
    if np.unique(logn).size < 2 or not np.all(np.isfinite(logl)):
        raise ManifoldTestError(
            "gmst-fit-failed",
            "need finite edge lengths at two or more distinct sizes",
            residuals=list(map(float, lengths)),
        )
    A = np.column_stack([np.ones_like(logn), logn])
    coef, *_ = np.linalg.lstsq(A, logl, rcond=None)
    resid = logl - A @ coef
    return float(np.exp(coef[0])), float(coef[1]), resid


def gmst_local_dimension(
    cloud,
    p,
    n_range,
    k=5,
    gamma=1.0,
    *,
    n_draws=3,
    averaging="joint",
    random_state=0,
    index=None,
):
    """Local GMST dimension at point ``p`` (an index, or a location in space).

    The neighborhood is the ``max(n_range)`` nearest neighbors of ``p``. For
    each size n, ``n_draws`` uniform subsamples of n points (``p`` always
    included) are drawn from that fixed neighborhood and the kNN-graph length
    is measured. The growth law ``L(n) = a * n**((d - gamma) / d)`` is fitted
    in log space. ``averaging="joint"`` fits all (n, L) pairs at once;
    ``"pairwise"`` fits consecutive sizes separately and averages the
    resulting dimensions.
    """
    index = NeighborIndex(cloud) if index is None else index
    X = index.X
    D = X.shape[1]
    n_values = sorted(int(n) for n in n_range)
    if not n_values:
        raise ManifoldTestError("gmst-fit-failed", "empty n_range")
    if n_values[0] <= k:
        raise ManifoldTestError("k-exceeds-neighborhood", f"n={n_values[0]} <= k={k}")
    if gamma <= 0:
        raise ManifoldTestError("bad-gamma", f"gamma={gamma} must be > 0")
    if np.ndim(p) == 0:
        point_id = int(p)
        outer = index.knn(point_id, n_values[-1])
    else:
        point_id = -1
        outer = index.knn(np.asarray(p, dtype=float), n_values[-1])
    rng = np.random.default_rng([int(random_state), max(point_id, 0)])
    ns, lengths = [], []
    for n in n_values:
        for _ in range(n_draws):
            if n == len(outer):
                sub = outer
            else:
                rest = rng.choice(len(outer) - 1, size=n - 1, replace=False) + 1
                sub = np.concatenate([outer[:1], outer[rest]])
            ns.append(n)
            lengths.append(_knn_graph_length(X[sub], k, gamma))

    if averaging == "joint":
        a, e, resid = _fit_growth(ns, lengths)
        d_raw = _exponent_to_dim(e, gamma)
    elif averaging == "pairwise":
        ns_arr, l_arr = np.asarray(ns), np.asarray(lengths)
        if len(n_values) < 2:
            raise ManifoldTestError("gmst-fit-failed", "pairwise averaging needs two sizes")
        dims = []
        for lo, hi in zip(n_values[:-1], n_values[1:]):
            sel = (ns_arr == lo) | (ns_arr == hi)
            dims.append(_exponent_to_dim(_fit_growth(ns_arr[sel], l_arr[sel])[1], gamma))
        a, e, resid = _fit_growth(ns, lengths)
        d_raw = float(np.mean(np.clip(dims, 1.0, D)))
    else:
        raise ManifoldTestError("bad-averaging", averaging)

    d_est = float(np.clip(d_raw, 1.0, D))
    clamped = not (1.0 <= d_raw <= D)
    if clamped:
        warnings.warn(
            f"GMST dimension {d_raw:.3g} at point {point_id} clamped to [1, {D}]",
            RuntimeWarning,
            stacklevel=2,
        )
    return GmstFit(
        point_id=point_id,
        n_values=ns,
        edge_lengths=lengths,
        a=a,
        exponent=e,
        d_est=d_est,
        d_rounded=int(np.floor(d_est + 0.5)),
        clamped=clamped,
        residuals=[float(r) for r in resid],
    )


def _exponent_to_dim(e, gamma):
    # L ~ n**((d - gamma) / d)  =>  d = gamma / (1 - e)
    if e >= 1.0:
        return np.inf
    return gamma / (1.0 - e)
