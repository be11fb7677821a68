"""Squared-distance statistics, resampled reference distributions and decisions.

For a point set inside one leaf cube the squared distance to the leaf's
variance-dimension subspace is bounded by ``(1 - t)`` times the total
variance of the set; that bound, summed over leaves and divided by the number
of supported points, is the test statistic (``mean_bound``). The reference
distribution for stratum ``i`` comes from repeatedly holding out a random
test part of the stratum, fitting a multi-manifold to the rest and recording
the statistic of the held-out part.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_cloud, check_threshold
from .core import center_and_svd, tail_variance, total_variance
from .errors import ManifoldTestError
from .idim import compute_all_ids, stratify
from .multimanifold import BuildParams, assign_components, build_multimanifold

__all__ = [
    "SqdReport",
    "TestConfig",
    "TestDistribution",
    "Decision",
    "Reference",
    "sqd_component",
    "sqd_total",
    "resample_distribution",
    "decide",
    "fit_reference",
    "evaluate_candidate",
    "full_test",
]

ACCEPT = "accept"
REJECT = "reject"
NO_MATCH = "reject-no-matching-stratum"

DIST_FORMAT = "mmh.distribution"
DECISION_FORMAT = "mmh.decision"
VERSION = 1


@dataclass(frozen=True)
class SqdReport:
    per_component: list
    total_bound: float
    total_exact: float
    supported: int
    unsupported: int

    @property
    def mean_bound(self):
        return self.total_bound / self.supported if self.supported else 0.0

    @property
    def mean_exact(self):
        return self.total_exact / self.supported if self.supported else 0.0


@dataclass(frozen=True)
class TestConfig:
    runs: int = 20
    test_fraction: float = 1.0 / 3.0
    delta: float = 0.05
    seed: int = 0
    build: BuildParams = field(default_factory=BuildParams)
    t: float = 0.95
    one_sided: bool = False
    support_floor: float = 0.5
    candidate_sample: int | None = None

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ManifoldTestError("bad-test-fraction", f"{self.test_fraction} not in (0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ManifoldTestError("bad-delta", f"{self.delta} not in (0, 1)")
        if self.runs < 1:
            raise ManifoldTestError("bad-runs", f"runs={self.runs}")
        check_threshold(self.t)

    def to_dict(self):
        return {
            "runs": self.runs,
            "test_fraction": self.test_fraction,
            "delta": self.delta,
            "seed": self.seed,
            "build": self.build.to_dict(),
            "t": self.t,
            "one_sided": self.one_sided,
            "support_floor": self.support_floor,
            "candidate_sample": self.candidate_sample,
        }


@dataclass
class TestDistribution:
    """Resampled statistic for one stratum; ``samples[r]`` is run r's mean_bound."""

    stratum_dim: int
    samples: list
    mean: float
    sd: float
    z_cutoff: float
    delta: float
    train_count: float
    test_count: float
    support_fraction: float
    run_support: list = field(default_factory=list)

    __test__ = False

    @property
    def runs(self):
        return len(self.samples)

    def quantile(self, q):
        return float(np.quantile(np.asarray(self.samples), q, method="linear"))

    def to_dict(self):
        return {
            "format": DIST_FORMAT,
            "version": VERSION,
            "stratum_dim": self.stratum_dim,
            "runs": self.runs,
            "samples": list(self.samples),
            "mean": self.mean,
            "sd": self.sd,
            "z_cutoff": self.z_cutoff,
            "delta": self.delta,
            "train_count": self.train_count,
            "test_count": self.test_count,
            "support_fraction": self.support_fraction,
            "run_support": list(self.run_support),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != DIST_FORMAT or d.get("version") != VERSION:
            raise ManifoldTestError("bad-format", "not a version-1 distribution document")
        dist = cls(
            d["stratum_dim"],
            list(d["samples"]),
            d["mean"],
            d["sd"],
            d["z_cutoff"],
            d["delta"],
            d["train_count"],
            d["test_count"],
            d["support_fraction"],
            list(d.get("run_support", [])),
        )
        if d["runs"] != dist.runs:
            raise ManifoldTestError("bad-format", "runs does not match the sample count")
        return dist


@dataclass(frozen=True)
class Decision:
    stratum_dim: int
    statistic: float
    interval: tuple
    verdict: str
    supported: int = 0
    unsupported: int = 0
    warnings: tuple = ()

    @property
    def accepted(self):
        return self.verdict == ACCEPT

    @property
    def support_fraction(self):
        n = self.supported + self.unsupported
        return self.supported / n if n else 0.0

    def to_dict(self):
        return {
            "format": DECISION_FORMAT,
            "version": VERSION,
            "stratum_dim": self.stratum_dim,
            "statistic": _json_float(self.statistic),
            "interval": [_json_float(v) for v in self.interval],
            "verdict": self.verdict,
            "supported": self.supported,
            "unsupported": self.unsupported,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["stratum_dim"],
            _from_json_float(d["statistic"]),
            tuple(_from_json_float(v) for v in d["interval"]),
            d["verdict"],
            d["supported"],
            d["unsupported"],
            tuple(d["warnings"]),
        )


def _json_float(v):
    # JSON has no inf/nan; keep them as strings so documents stay standard.
    v = float(v)
    return v if np.isfinite(v) else repr(v)


def _from_json_float(v):
    return float(v)


def sqd_component(test_members, t, d):
    """``(bound, exact)`` squared-distance figures for the points in one leaf.

    ``bound = (1 - t) * total variance`` of the centered points and ``exact``
    is the singular-value tail beyond ``d``. ``exact <= bound`` holds whenever
    ``d`` is at least the set's own variance dimension; otherwise the tail can
    exceed the bound.
    """
    t = check_threshold(t)
    summary = center_and_svd(test_members, compute_basis=False)
    if not 0 <= d <= summary.dim:
        raise ManifoldTestError("dimension-exceeds-ambient", f"d={d}")
    return (1.0 - t) * total_variance(summary), tail_variance(summary, d)


def sqd_total(test_set, mm, t):
    """Sum the per-leaf figures over the leaves that receive test points."""
    X = check_cloud(test_set, allow_empty=True)
    if len(X) == 0:
        return SqdReport([], 0.0, 0.0, 0, 0)
    labels = assign_components(mm, X)
    per = []
    total_b = total_e = 0.0
    for k in np.unique(labels[labels >= 0]):
        pts = X[labels == k]
        b, e = sqd_component(pts, t, mm.components[k].d)
        per.append((int(k), len(pts), b, e))
        total_b += b
        total_e += e
    supported = int(np.count_nonzero(labels >= 0))
    return SqdReport(per, total_b, total_e, supported, len(X) - supported)


def _summarize(samples, delta):
    arr = np.asarray(samples, dtype=float)
    mean = float(np.mean(arr))
    sd = float(np.std(arr, ddof=1)) if len(arr) > 1 else 0.0
    q = float(np.quantile(arr, 1.0 - delta, method="linear"))
    z = (q - mean) / sd if sd > 0 else 0.0
    return mean, sd, z


def resample_distribution(stratum_points, i, config):
    """Reference distribution of the held-out statistic for stratum ``i``.

    Run r draws its test part with ``numpy.random.default_rng(seed + r)``, so
    the result depends only on the inputs and the config.
    """
    X = check_cloud(stratum_points)
    n = len(X)
    n_test = int(round(config.test_fraction * n))
    n_train = n - n_test
    min_leaf = config.build.leaf_minimum(i)
    if n_test < 1 or n_train < min_leaf:
        raise ManifoldTestError(
            "stratum-too-small",
            f"{n} points leave {n_train} for training, need {min_leaf}",
            stratum=i,
        )
    samples, support = [], []
    for r in range(config.runs):
        rng = np.random.default_rng(config.seed + r)
        test_mask = np.zeros(n, dtype=bool)
        test_mask[rng.choice(n, size=n_test, replace=False)] = True
        mm = build_multimanifold(X[~test_mask], i, config.build)
        rep = sqd_total(X[test_mask], mm, config.t)
        samples.append(rep.mean_bound)
        support.append(rep.supported / n_test)
    mean, sd, z = _summarize(samples, config.delta)
    return TestDistribution(
        stratum_dim=int(i),
        samples=samples,
        mean=mean,
        sd=sd,
        z_cutoff=z,
        delta=config.delta,
        train_count=float(n_train),
        test_count=float(n_test),
        support_fraction=float(np.mean(support)),
        run_support=support,
    )


def acceptance_interval(dist, delta, one_sided=False):
    if one_sided:
        return (-np.inf, dist.quantile(1.0 - delta))
    return (dist.quantile(delta / 2.0), dist.quantile(1.0 - delta / 2.0))


def decide(candidate_stat, dist, delta, *, one_sided=False, stratum_dim=None, supported=0, unsupported=0, support_floor=0.5):
    """Accept iff the statistic lies in the empirical acceptance interval.

    ``dist=None`` means the data has no stratum of this dimension. A NaN
    statistic (no supported candidate points) always rejects. When every
    resampled value is the same, values within 1e-12 of it accept.
    """
    warnings = []
    n = supported + unsupported
    if n and supported / n < support_floor:
        warnings.append("low-support")
    if dist is None:
        if stratum_dim is None:
            raise ManifoldTestError("no-stratum", "stratum_dim is required without a distribution")
        return Decision(int(stratum_dim), float(candidate_stat), (np.nan, np.nan), NO_MATCH, supported, unsupported, tuple(warnings))
    if dist.runs < 2:
        raise ManifoldTestError("insufficient-runs", f"{dist.runs} run(s)", stratum=dist.stratum_dim)
    lower, upper = acceptance_interval(dist, delta, one_sided)
    stat = float(candidate_stat)
    if upper - lower <= 1e-12:
        inside = lower - 1e-12 <= stat <= upper + 1e-12
    else:
        inside = lower <= stat <= upper
    if not np.isfinite(stat):
        warnings.append("no-support")
        inside = False
    return Decision(
        dist.stratum_dim,
        stat,
        (lower, upper),
        ACCEPT if inside else REJECT,
        supported,
        unsupported,
        tuple(warnings),
    )


@dataclass
class Reference:
    """Everything learned from the data cloud that a candidate is tested against."""

    records: list
    strata: object
    manifolds: dict
    distributions: dict
    skipped: dict


def fit_reference(data, id_params, config, *, n_jobs=None, records=None):
    """Local dimensions, strata, per-stratum manifolds and reference distributions."""
    X = check_cloud(data)
    if records is None:
        records = compute_all_ids(X, id_params, n_jobs=n_jobs)
    strata = stratify(records)
    build = config.build
    if build.K is None:
        build = BuildParams(build.t, build.min_leaf_points, build.max_depth, strata.max_dimension)
        config = _with_build(config, build)
    manifolds, dists, skipped = {}, {}, {}
    for i, rows in strata.groups.items():
        manifolds[i] = build_multimanifold(X[rows], i, build, ids=rows)
        try:
            dists[i] = resample_distribution(X[rows], i, config)
        except ManifoldTestError as err:
            if err.code != "stratum-too-small":
                raise
            skipped[i] = str(err)
    return Reference(records, strata, manifolds, dists, skipped)


def _with_build(config, build):
    d = dict(config.__dict__)
    d["build"] = build
    return TestConfig(**d)


def evaluate_candidate(reference, candidate, id_params, config, *, n_jobs=None, records=None):
    """One decision per stratum of the candidate cloud, in increasing dimension."""
    Y = check_cloud(candidate)
    if config.candidate_sample is not None and config.candidate_sample < len(Y):
        rng = np.random.default_rng(config.seed)
        Y = Y[np.sort(rng.choice(len(Y), config.candidate_sample, replace=False))]
        records = None
    if records is None:
        records = compute_all_ids(Y, id_params, n_jobs=n_jobs)
    strata = stratify(records)
    decisions = []
    for k, rows in strata.groups.items():
        if k in reference.skipped:
            raise ManifoldTestError("stratum-too-small", reference.skipped[k], stratum=k)
        if k not in reference.distributions:
            decisions.append(decide(np.nan, None, config.delta, stratum_dim=k, supported=0, unsupported=len(rows)))
            continue
        rep = sqd_total(Y[rows], reference.manifolds[k], config.t)
        stat = rep.mean_bound if rep.supported else np.nan
        decisions.append(
            decide(
                stat,
                reference.distributions[k],
                config.delta,
                one_sided=config.one_sided,
                supported=rep.supported,
                unsupported=rep.unsupported,
                support_floor=config.support_floor,
            )
        )
    return decisions


def full_test(data, candidate, id_params, config, *, n_jobs=None):
    """Fit the reference on ``data`` and test every stratum of ``candidate`` against it."""
    X = check_cloud(data, name="data")
    Y = check_cloud(candidate, name="candidate")
    if X.shape[1] != Y.shape[1]:
        raise ManifoldTestError("dimension-mismatch", f"data is {X.shape[1]}-d, candidate {Y.shape[1]}-d")
    ref = fit_reference(X, id_params, config, n_jobs=n_jobs)
    return evaluate_candidate(ref, Y, id_params, config, n_jobs=n_jobs)


def dump_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
