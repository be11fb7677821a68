"""scikit-learn compatible wrappers around the functional pipeline.

Each estimator takes only hyperparameters in ``__init__`` and stores fitted
state in trailing-underscore attributes, so ``get_params``/``set_params``,
``clone`` and pipelines work as usual.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_cloud
from .errors import ManifoldTestError
from .hypothesis import (
    TestConfig,
    decide,
    evaluate_candidate,
    fit_reference,
    sqd_total,
)
from .idim import (
    IdParams,
    compute_all_ids,
    diagnostic_encodings,
    gmst_local_dimension,
    records_to_arrays,
    stratify,
)
from .multimanifold import BuildParams, assign_components, build_multimanifold
from .neighborhoods import NeighborhoodSpec, NeighborIndex, dyadic_radii

__all__ = [
    "LocalDimensionEstimator",
    "LocalGMST",
    "DyadicLinearMultiManifold",
    "MultiManifoldTest",
]


def _neighborhood_spec(X, radii, knn, scales):
    given = [v is not None for v in (radii, knn, scales)]
    if sum(given) > 1:
        raise ManifoldTestError("bad-spec", "give at most one of radii, knn, scales")
    if radii is not None:
        return NeighborhoodSpec.ball(sorted(radii, reverse=True))
    if knn is not None:
        return NeighborhoodSpec.knn(sorted(knn))
    lo, hi = (4, 7) if scales is None else scales
    return NeighborhoodSpec.ball(dyadic_radii(X, lo, hi))


class LocalDimensionEstimator(TransformerMixin, BaseEstimator):
    """Per-point variance-based local intrinsic dimension.

    Parameters
    ----------
    t : float
        Fraction of total variance the leading directions must reach.
    cutoff : int
        Neighborhoods with ``cutoff`` or fewer points are ignored.
    radii, knn, scales :
        Neighborhood ladder: explicit radii, neighbor counts, or dyadic scale
        range ``(lo, hi)`` giving radii ``diam * 2**-s``. At most one may be
        set; the default is ``scales=(4, 7)``.

    Attributes
    ----------
    records_ : list of LocalIdRecord
    dimension_ : ndarray of int, -1 where undefined
    strata_ : Strata
    """

    def __init__(self, t=0.95, cutoff=10, radii=None, knn=None, scales=None,
                 algorithm="auto", method="scatter", n_jobs=None):
        self.t = t
        self.cutoff = cutoff
        self.radii = radii
        self.knn = knn
        self.scales = scales
        self.algorithm = algorithm
        self.method = method
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        X = check_cloud(X)
        self.spec_ = _neighborhood_spec(X, self.radii, self.knn, self.scales)
        self.params_ = IdParams(self.t, self.cutoff, self.spec_)
        self.index_ = NeighborIndex(X, self.algorithm)
        self.n_features_in_ = X.shape[1]
        self.records_ = compute_all_ids(X, self.params_, index=self.index_,
                                        n_jobs=self.n_jobs, method=self.method)
        self.dimension_ = records_to_arrays(self.records_)
        self.strata_ = stratify(self.records_)
        return self

    def _encode(self, records):
        lex, energy = diagnostic_encodings(records, self.spec_)
        return np.column_stack([records_to_arrays(records), lex, energy]).astype(float)

    def transform(self, X):
        """Columns ``(dimension, lex_code, energy)`` for neighborhoods around each row of X."""
        check_is_fitted(self, "records_")
        X = check_cloud(X)
        if X.shape[1] != self.n_features_in_:
            raise ManifoldTestError("dimension-mismatch", f"expected {self.n_features_in_} features")
        recs = compute_all_ids(self.index_.X, self.params_, index=self.index_, centers=X,
                               n_jobs=self.n_jobs, method=self.method)
        return self._encode(recs)

    def fit_transform(self, X, y=None):
        return self.fit(X)._encode(self.records_)


class LocalGMST(TransformerMixin, BaseEstimator):
    """Local GMST dimension from kNN-graph length growth.

    ``transform`` returns one column of fitted (clamped) dimensions.
    """

    def __init__(self, n_range=tuple(range(200, 401, 25)), k=5, gamma=1.0, n_draws=3,
                 averaging="joint", random_state=0):
        self.n_range = n_range
        self.k = k
        self.gamma = gamma
        self.n_draws = n_draws
        self.averaging = averaging
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_cloud(X)
        if max(self.n_range) > len(X):
            raise ManifoldTestError("k-exceeds-cloud", f"n={max(self.n_range)} > {len(X)} points")
        self.index_ = NeighborIndex(X)
        self.n_features_in_ = X.shape[1]
        return self

    def _fit_at(self, p):
        return gmst_local_dimension(
            self.index_.X, p, self.n_range, self.k, self.gamma, n_draws=self.n_draws,
            averaging=self.averaging, random_state=self.random_state, index=self.index_,
        )

    def estimate(self, indices=None):
        """GmstFit for fitted points (all of them when ``indices`` is None)."""
        check_is_fitted(self, "index_")
        if indices is None:
            indices = range(len(self.index_))
        return [self._fit_at(int(i)) for i in indices]

    def transform(self, X):
        check_is_fitted(self, "index_")
        X = check_cloud(X)
        return np.array([[self._fit_at(x).d_est] for x in X])


class DyadicLinearMultiManifold(BaseEstimator):
    """Piecewise-linear approximation of one stratum on a dyadic cube tree.

    ``predict`` labels points with the index of the leaf cube containing them
    (-1 outside every leaf); ``score`` is the negated per-point
    squared-distance bound, so larger is a better fit.
    """

    def __init__(self, stratum_dim=1, t=0.95, min_leaf_points=None, max_depth=12, K=None):
        self.stratum_dim = stratum_dim
        self.t = t
        self.min_leaf_points = min_leaf_points
        self.max_depth = max_depth
        self.K = K

    def fit(self, X, y=None):
        X = check_cloud(X)
        params = BuildParams(self.t, self.min_leaf_points, self.max_depth, self.K)
        self.manifold_ = build_multimanifold(X, self.stratum_dim, params)
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def components_(self):
        check_is_fitted(self, "manifold_")
        return self.manifold_.components

    def predict(self, X):
        check_is_fitted(self, "manifold_")
        return assign_components(self.manifold_, check_cloud(X))

    def sqd(self, X):
        check_is_fitted(self, "manifold_")
        return sqd_total(X, self.manifold_, self.t)

    def score(self, X, y=None):
        return -self.sqd(X).mean_bound


class MultiManifoldTest(BaseEstimator):
    """Multi-manifold goodness-of-fit test.

    ``fit`` learns strata, per-stratum multi-manifolds and resampled reference
    distributions from a data cloud; ``decide`` tests a candidate cloud and
    returns one :class:`~mmh.hypothesis.Decision` per candidate stratum.
    """

    def __init__(self, t=0.95, cutoff=10, radii=None, knn=None, scales=None, runs=20,
                 test_fraction=1.0 / 3.0, delta=0.05, one_sided=False, random_state=0,
                 min_leaf_points=None, max_depth=12, support_floor=0.5,
                 candidate_sample=None, n_jobs=None):
        self.t = t
        self.cutoff = cutoff
        self.radii = radii
        self.knn = knn
        self.scales = scales
        self.runs = runs
        self.test_fraction = test_fraction
        self.delta = delta
        self.one_sided = one_sided
        self.random_state = random_state
        self.min_leaf_points = min_leaf_points
        self.max_depth = max_depth
        self.support_floor = support_floor
        self.candidate_sample = candidate_sample
        self.n_jobs = n_jobs

    def _config(self):
        return TestConfig(
            runs=self.runs,
            test_fraction=self.test_fraction,
            delta=self.delta,
            seed=int(self.random_state),
            build=BuildParams(self.t, self.min_leaf_points, self.max_depth),
            t=self.t,
            one_sided=self.one_sided,
            support_floor=self.support_floor,
            candidate_sample=self.candidate_sample,
        )

    def fit(self, X, y=None):
        X = check_cloud(X)
        spec = _neighborhood_spec(X, self.radii, self.knn, self.scales)
        self.id_params_ = IdParams(self.t, self.cutoff, spec)
        self.config_ = self._config()
        self.reference_ = fit_reference(X, self.id_params_, self.config_, n_jobs=self.n_jobs)
        self.strata_ = self.reference_.strata
        self.manifolds_ = self.reference_.manifolds
        self.distributions_ = self.reference_.distributions
        self.n_features_in_ = X.shape[1]
        return self

    def decide(self, Y):
        check_is_fitted(self, "reference_")
        Y = check_cloud(Y)
        if Y.shape[1] != self.n_features_in_:
            raise ManifoldTestError("dimension-mismatch", f"expected {self.n_features_in_} features")
        return evaluate_candidate(self.reference_, Y, self.id_params_, self.config_, n_jobs=self.n_jobs)

    def predict(self, Y):
        """Per-point verdict of the candidate stratum each point falls in.

        Undefined-dimension points get ``"unclassified"``.
        """
        check_is_fitted(self, "reference_")
        Y = check_cloud(Y)
        recs = compute_all_ids(Y, self.id_params_, n_jobs=self.n_jobs)
        found = evaluate_candidate(self.reference_, Y, self.id_params_, self.config_,
                                   n_jobs=self.n_jobs, records=recs)
        decisions = {d.stratum_dim: d.verdict for d in found}
        dims = records_to_arrays(recs)
        return np.array([decisions.get(int(k), "unclassified") if k >= 0 else "unclassified"
                         for k in dims], dtype=object)

    def score(self, Y, y=None):
        """Fraction of candidate strata accepted."""
        decisions = self.decide(Y)
        return float(np.mean([d.accepted for d in decisions])) if decisions else 0.0

    def decide_statistic(self, stratum_dim, statistic):
        """Decision for a precomputed statistic against the fitted reference."""
        check_is_fitted(self, "reference_")
        return decide(statistic, self.distributions_.get(stratum_dim), self.delta,
                      one_sided=self.one_sided, stratum_dim=stratum_dim)
