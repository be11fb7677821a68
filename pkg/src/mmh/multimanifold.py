"""Dyadic linear multi-manifolds.

A stratum of points of local dimension ``i`` is covered by a root cube that
is halved recursively, cycling through the coordinate axes. Recursion stops
in a cube whose points have variance dimension at most ``i`` (or at the depth
limit); each such leaf contributes the best-fit affine subspace of its points.
Cubes that end up with fewer than ``min_leaf_points`` points are discarded
and their points counted as dropped.

Cubes are half-open, ``lo <= x < hi`` per axis, except that faces on the
root's upper boundary are closed. A point exactly on a split plane goes to
the upper child.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_cloud
from .core import AffineSubspace, SvdSummary, best_fit_affine, center_and_svd
from .errors import ManifoldTestError
from .idim import d_vid

__all__ = [
    "DyadicCube",
    "BuildParams",
    "LinearComponent",
    "MultiManifold",
    "root_cube",
    "split_cube",
    "build_multimanifold",
    "locate_leaf",
    "assign_components",
]

FORMAT = "mmh.multimanifold"
VERSION = 1


@dataclass(frozen=True)
class DyadicCube:
    lo: np.ndarray
    hi: np.ndarray
    depth: int = 0
    closed_hi: np.ndarray = None

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if self.closed_hi is None:
            object.__setattr__(self, "closed_hi", np.ones(lo.shape, dtype=bool))
        else:
            object.__setattr__(self, "closed_hi", np.asarray(self.closed_hi, dtype=bool))

    @property
    def side(self):
        return self.hi - self.lo

    @property
    def split_axis(self):
        return self.depth % self.lo.shape[0]

    def contains(self, X):
        X = np.atleast_2d(X)
        upper = np.where(self.closed_hi, X <= self.hi, X < self.hi)
        return np.all((X >= self.lo) & upper, axis=1)

    def to_dict(self):
        return {
            "lo": self.lo.tolist(),
            "hi": self.hi.tolist(),
            "side": self.side.tolist(),
            "depth": self.depth,
            "closed_hi": self.closed_hi.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["lo"]), np.array(d["hi"]), int(d["depth"]), np.array(d["closed_hi"]))


@dataclass(frozen=True)
class BuildParams:
    """Leaf-fitting parameters.

    ``min_leaf_points=None`` means ``max(ceil(K ln K), 2 i + 2)`` for stratum
    ``i``, where ``K`` (default: ``i``) is the largest observed dimension.
    """

    t: float = 0.95
    min_leaf_points: int | None = None
    max_depth: int = 12
    K: int | None = None

    def __post_init__(self):
        if not 0.0 < self.t <= 1.0:
            raise ManifoldTestError("bad-threshold", f"t={self.t} not in (0, 1]")
        if self.min_leaf_points is not None and self.min_leaf_points < 2:
            raise ManifoldTestError("bad-min-leaf", f"min_leaf_points={self.min_leaf_points} < 2")
        if self.max_depth < 0:
            raise ManifoldTestError("bad-depth", f"max_depth={self.max_depth} < 0")

    def leaf_minimum(self, i):
        if self.min_leaf_points is not None:
            return int(self.min_leaf_points)
        K = max(int(self.K if self.K is not None else i), 1)
        return max(math.ceil(K * math.log(K)), 2 * int(i) + 2, 2)

    def to_dict(self):
        return {
            "t": self.t,
            "min_leaf_points": self.min_leaf_points,
            "max_depth": self.max_depth,
            "K": self.K,
        }


@dataclass(frozen=True)
class LinearComponent:
    cube: DyadicCube
    subspace: AffineSubspace
    member_ids: np.ndarray
    svd: SvdSummary

    @property
    def d(self):
        return self.subspace.d


@dataclass
class MultiManifold:
    stratum_dim: int
    components: list
    params: BuildParams
    dropped_count: int
    root: DyadicCube | None
    min_leaf_points: int = 0
    point_count: int = 0
    _boxes: tuple = field(default=None, repr=False, compare=False)

    def __len__(self):
        return len(self.components)

    @property
    def supported_count(self):
        return int(sum(len(c.member_ids) for c in self.components))

    def to_dict(self):
        return {
            "format": FORMAT,
            "version": VERSION,
            "stratum_dim": self.stratum_dim,
            "params": self.params.to_dict(),
            "min_leaf_points": self.min_leaf_points,
            "point_count": self.point_count,
            "dropped_count": self.dropped_count,
            "root": None if self.root is None else self.root.to_dict(),
            "components": [
                {
                    "cube": c.cube.to_dict(),
                    "origin": c.subspace.origin.tolist(),
                    "basis": c.subspace.basis.tolist(),
                    "d": c.d,
                    "member_count": len(c.member_ids),
                    "member_ids": c.member_ids.tolist(),
                    "sigma2": (c.svd.singular_values**2).tolist(),
                    "singular_values": c.svd.singular_values.tolist(),
                    "svd_basis": c.svd.basis.tolist(),
                }
                for c in self.components
            ],
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != FORMAT or doc.get("version") != VERSION:
            raise ManifoldTestError("bad-format", "not a version-1 multimanifold document")
        p = doc["params"]
        params = BuildParams(p["t"], p["min_leaf_points"], p["max_depth"], p["K"])
        comps = []
        for c in doc["components"]:
            D = len(c["origin"])
            origin = np.array(c["origin"], dtype=float)
            basis = np.array(c["basis"], dtype=float).reshape(-1, D)
            sv = np.array(c["singular_values"], dtype=float)
            svd = SvdSummary(origin.copy(), sv, np.array(c["svd_basis"]).reshape(-1, D), c["member_count"])
            comps.append(
                LinearComponent(
                    DyadicCube.from_dict(c["cube"]),
                    AffineSubspace(origin, basis),
                    np.array(c["member_ids"], dtype=np.intp),
                    svd,
                )
            )
        root = None if doc["root"] is None else DyadicCube.from_dict(doc["root"])
        return cls(
            doc["stratum_dim"],
            comps,
            params,
            doc["dropped_count"],
            root,
            doc["min_leaf_points"],
            doc["point_count"],
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def boxes(self):
        if self._boxes is None:
            if self.components:
                lo = np.stack([c.cube.lo for c in self.components])
                hi = np.stack([c.cube.hi for c in self.components])
                closed = np.stack([c.cube.closed_hi for c in self.components])
            else:
                lo = hi = np.empty((0, 0))
                closed = np.empty((0, 0), dtype=bool)
            self._boxes = (lo, hi, closed)
        return self._boxes


def root_cube(points):
    """Axis-aligned cube anchored at the per-axis minimum with the largest extent as side.

    The side is inflated by a relative 1e-9 so every point is strictly below
    the upper faces. A single repeated point gets a 1e-9 cube centered on it.
    """
    X = check_cloud(points)
    lo = X.min(axis=0)
    extent = float(np.max(X.max(axis=0) - lo))
    if extent == 0.0:
        side = 1e-9
        lo = lo - side / 2
    else:
        side = extent * (1.0 + 1e-9)
    return DyadicCube(lo, lo + side, 0)


def split_cube(cube, points):
    """Halve ``cube`` along ``depth mod D``.

    Returns ``(lower, upper, upper_mask)`` where ``upper_mask`` flags the rows
    of ``points`` at or above the midpoint.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    a = cube.split_axis
    mid = cube.lo[a] + 0.5 * (cube.hi[a] - cube.lo[a])
    lower_hi = cube.hi.copy()
    lower_hi[a] = mid
    lower_closed = cube.closed_hi.copy()
    lower_closed[a] = False
    upper_lo = cube.lo.copy()
    upper_lo[a] = mid
    lower = DyadicCube(cube.lo.copy(), lower_hi, cube.depth + 1, lower_closed)
    upper = DyadicCube(upper_lo, cube.hi.copy(), cube.depth + 1, cube.closed_hi.copy())
    mask = X[:, a] >= mid if X.size else np.zeros(0, dtype=bool)
    return lower, upper, mask


def build_multimanifold(stratum_points, i, params=BuildParams(), *, ids=None):
    """Fit the dyadic linear multi-manifold of one stratum.

    ``ids`` labels the rows of ``stratum_points`` (defaults to 0..n-1) and is
    what components store as ``member_ids``. Cubes are visited depth-first,
    lower half before upper half, so component order is deterministic.
    """
    X = check_cloud(stratum_points, allow_empty=True)
    if X.shape[0] == 0:
        raise ManifoldTestError("empty-stratum", f"stratum {i} has no points")
    ids = np.arange(len(X)) if ids is None else np.asarray(ids, dtype=np.intp)
    i = int(i)
    min_leaf = params.leaf_minimum(i)
    root = root_cube(X)
    components = []
    dropped = 0
    stack = [(root, np.arange(len(X)))]
    while stack:
        cube, rows = stack.pop()
        if len(rows) == 0:
            continue
        if len(rows) < min_leaf:
            dropped += len(rows)
            continue
        P = X[rows]
        dim = d_vid(P, params.t, min_leaf)
        if (dim is not None and dim <= i) or cube.depth >= params.max_depth:
            if dim is None:
                dim = d_vid(P, params.t, 0)
            summary = center_and_svd(P)
            sub = best_fit_affine(P, min(dim, i), summary=summary)
            components.append(LinearComponent(cube, sub, ids[rows], summary))
            continue
        lower, upper, mask = split_cube(cube, P)
        # Pushed in reverse so the lower child is processed first.
        stack.append((upper, rows[mask]))
        stack.append((lower, rows[~mask]))
    return MultiManifold(i, components, params, dropped, root, min_leaf, len(X))


def assign_components(mm, X):
    """Component index for each row of ``X``; -1 where no leaf cube contains it."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.full(len(X), -1, dtype=np.intp)
    if not mm.components or len(X) == 0:
        return out
    lo, hi, closed = mm.boxes()
    if X.shape[1] != lo.shape[1]:
        raise ManifoldTestError("dimension-mismatch", f"points are {X.shape[1]}-d, manifold {lo.shape[1]}-d")
    # Chunked to bound the (rows x components x D) temporary.
    step = max(1, 2_000_000 // max(1, lo.size))
    for s in range(0, len(X), step):
        Y = X[s : s + step, None, :]
        inside = (Y >= lo) & np.where(closed, Y <= hi, Y < hi)
        hit = inside.all(axis=2)
        any_hit = hit.any(axis=1)
        out[s : s + step][any_hit] = np.argmax(hit[any_hit], axis=1)
    return out


def locate_leaf(mm, x):
    """Index of the component whose cube contains ``x``, or None."""
    k = assign_components(mm, np.asarray(x, dtype=float).reshape(1, -1))[0]
    return None if k < 0 else int(k)


