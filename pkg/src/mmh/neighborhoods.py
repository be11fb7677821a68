"""Ball and k-nearest-neighbor neighborhoods over a frozen point cloud.

Correctness is defined by the O(n^2) scan. The KD-tree path only produces a
candidate superset; final membership and ordering are always decided with
the same distance arithmetic as the scan, so both paths return identical
sets.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._validation import check_cloud
from .errors import ManifoldTestError

__all__ = [
    "NeighborhoodSpec",
    "NeighborhoodResult",
    "NeighborIndex",
    "ball_neighborhood",
    "knn_neighborhood",
    "dyadic_radii",
    "arithmetic_radii",
    "neighborhoods",
]

BALL = "ball-radii"
KNN = "knn-counts"

# Above this size, "auto" switches from the direct scan to a KD-tree.
_BRUTE_MAX = 4096
_INFLATE = 1e-9


@dataclass(frozen=True)
class NeighborhoodSpec:
    """List of neighborhood scales: radii (descending) or counts (ascending)."""

    kind: str
    values: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in (BALL, KNN):
            raise ManifoldTestError("bad-spec", f"unknown kind {self.kind!r}")
        vals = tuple(float(v) if self.kind == BALL else int(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not vals:
            raise ManifoldTestError("bad-spec", "empty scale list")
        arr = np.asarray(vals, dtype=float)
        if self.kind == BALL:
            if np.any(arr <= 0) or np.any(np.diff(arr) >= 0):
                raise ManifoldTestError("bad-spec", "radii must be > 0 and strictly descending")
        else:
            if np.any(arr < 1) or np.any(np.diff(arr) <= 0):
                raise ManifoldTestError("bad-spec", "counts must be >= 1 and strictly ascending")

    @classmethod
    def ball(cls, radii):
        return cls(BALL, tuple(radii))

    @classmethod
    def knn(cls, counts):
        return cls(KNN, tuple(counts))

    def __len__(self):
        return len(self.values)

    def to_dict(self):
        return {"kind": self.kind, "values": list(self.values)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], tuple(d["values"]))


@dataclass(frozen=True)
class NeighborhoodResult:
    center_id: int
    per_scale: list


def _sqdist(X, x):
    diff = X - x
    return np.einsum("ij,ij->i", diff, diff)


class NeighborIndex:
    """Exact neighborhood queries on a fixed cloud.

    Parameters
    ----------
    X : array-like of shape (n, D)
    algorithm : {"auto", "brute", "kd_tree"}
    """

    def __init__(self, X, algorithm="auto"):
        self.X = check_cloud(X)
        if algorithm == "auto":
            algorithm = "brute" if len(self.X) <= _BRUTE_MAX else "kd_tree"
        if algorithm not in ("brute", "kd_tree"):
            raise ManifoldTestError("bad-algorithm", algorithm)
        self.algorithm = algorithm
        self._tree = cKDTree(self.X) if algorithm == "kd_tree" else None

    def __len__(self):
        return len(self.X)

    def _point(self, center):
        if np.ndim(center) == 0:
            c = int(center)
            if not 0 <= c < len(self.X):
                raise ManifoldTestError("bad-index", f"center {c} out of range")
            return self.X[c]
        return np.asarray(center, dtype=float)

    def _exact_sorted(self, cand, x):
        # cand ascending + stable sort => distance ties keep index order
        cand = np.sort(cand)
        d = np.sqrt(_sqdist(self.X[cand], x))
        order = np.argsort(d, kind="stable")
        return cand[order], d[order]

    def sorted_within(self, center, radius):
        """Indices with distance <= radius, sorted by (distance, index), and their distances."""
        x = self._point(center)
        if self._tree is None:
            cand = np.arange(len(self.X))
        else:
            cand = np.asarray(
                self._tree.query_ball_point(x, radius * (1 + _INFLATE) + 1e-300),
                dtype=np.intp,
            )
        idx, d = self._exact_sorted(cand, x)
        keep = d <= radius
        return idx[keep], d[keep]

    def sorted_nearest(self, center, k):
        """The k nearest indices sorted by (distance, index), and their distances."""
        n = len(self.X)
        k = int(k)
        if k > n:
            raise ManifoldTestError("k-exceeds-cloud", f"k={k} > {n} points")
        if k < 1:
            raise ManifoldTestError("bad-spec", f"k={k} < 1")
        x = self._point(center)
        if self._tree is None:
            cand = np.arange(n)
        else:
            dk = np.atleast_1d(self._tree.query(x, k=k)[0])[-1]
            cand = np.asarray(
                self._tree.query_ball_point(x, dk * (1 + _INFLATE) + 1e-300),
                dtype=np.intp,
            )
        idx, d = self._exact_sorted(cand, x)
        return idx[:k], d[:k]

    def ball(self, center, radius):
        idx, _ = self.sorted_within(center, radius)
        return np.sort(idx)

    def knn(self, center, k):
        idx, _ = self.sorted_nearest(center, k)
        return idx

    def scale_members(self, center, spec):
        """Member index arrays for every scale of ``spec`` around ``center``.

        One sorted candidate list is computed at the outermost scale and the
        others are read off as prefixes of it.
        """
        if spec.kind == BALL:
            idx, d = self.sorted_within(center, spec.values[0])
            cuts = np.searchsorted(d, np.asarray(spec.values), side="right")
        else:
            kmax = spec.values[-1]
            idx, _ = self.sorted_nearest(center, kmax)
            cuts = np.asarray(spec.values)
        return [idx[:c] for c in cuts]


def ball_neighborhood(cloud, center, radius, *, index=None):
    """Indices j with ``|x_j - x_center| <= radius`` (closed ball), ascending."""
    if radius <= 0:
        raise ManifoldTestError("bad-radius", f"radius={radius} must be > 0")
    index = NeighborIndex(cloud) if index is None else index
    return index.ball(center, radius)


def knn_neighborhood(cloud, center, k, *, index=None):
    """The k nearest indices, the center included; ties go to the lower index."""
    index = NeighborIndex(cloud) if index is None else index
    return index.knn(center, k)


def dyadic_radii(cloud, scale_lo, scale_hi):
    """Radii ``diam * 2**-s`` for s in scale_lo..scale_hi (descending).

    ``diam`` is the largest per-axis coordinate range.
    """
    X = check_cloud(cloud)
    if scale_lo > scale_hi:
        raise ManifoldTestError("bad-scales", f"{scale_lo} > {scale_hi}")
    diam = float(np.max(X.max(axis=0) - X.min(axis=0)))
    if diam == 0.0:
        raise ManifoldTestError("degenerate-diameter", "all points coincide")
    return [float(np.ldexp(diam, -s)) for s in range(int(scale_lo), int(scale_hi) + 1)]


def arithmetic_radii(hi, lo, step):
    """Descending radii hi, hi - step, ..., lo (both endpoints included)."""
    if step <= 0 or lo <= 0 or hi < lo:
        raise ManifoldTestError("bad-radii", f"hi={hi} lo={lo} step={step}")
    count = int(round((hi - lo) / step)) + 1
    return [round(hi - k * step, 12) for k in range(count)]


def neighborhoods(cloud, center, spec, *, index=None):
    index = NeighborIndex(cloud) if index is None else index
    members = index.scale_members(center, spec)
    return NeighborhoodResult(int(center), list(zip(spec.values, members)))
