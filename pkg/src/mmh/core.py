"""Centered SVD summaries and affine subspaces.

Everything downstream (intrinsic dimension, leaf fitting, squared-distance
statistics) is expressed through :class:`SvdSummary`, so the singular values
are always taken from the centered point matrix itself, never from its
covariance: the residual tails we care about are sums of the *smallest*
squared singular values and squaring the matrix first would throw away half
their significant digits.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_cloud
from .errors import ManifoldTestError

__all__ = [
    "SvdSummary",
    "AffineSubspace",
    "center_and_svd",
    "total_variance",
    "tail_variance",
    "best_fit_affine",
    "residual_sqd_exact",
]


@dataclass(frozen=True)
class SvdSummary:
    """Centroid, singular values and right-singular basis of a point set.

    ``singular_values`` has length ``min(count, D)`` and is non-increasing;
    ``basis`` holds the matching right-singular vectors as rows.
    """

    mean: np.ndarray
    singular_values: np.ndarray
    basis: np.ndarray
    count: int

    @property
    def dim(self):
        return self.mean.shape[0]

    @property
    def squared(self):
        return self.singular_values**2


@dataclass(frozen=True)
class AffineSubspace:
    """``origin + span(basis)``; ``basis`` rows are orthonormal, possibly zero rows."""

    origin: np.ndarray
    basis: np.ndarray

    @property
    def d(self):
        return self.basis.shape[0]

    @property
    def ambient_dim(self):
        return self.origin.shape[0]

    def project(self, X):
        """Orthogonal projection of the rows of ``X`` onto the subspace."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        centered = X - self.origin
        return self.origin + (centered @ self.basis.T) @ self.basis

    def transport(self, Q, v):
        """Image of the subspace under ``x -> x @ Q.T + v``."""
        Q = np.asarray(Q, dtype=float)
        return AffineSubspace(Q @ self.origin + v, self.basis @ Q.T)


def center_and_svd(points, *, compute_basis=True):
    """Centroid and thin SVD of the centered ``(n, D)`` point matrix."""
    X = check_cloud(points, allow_empty=True)
    n, D = X.shape
    if n == 0:
        raise ManifoldTestError("empty-set", "cannot summarize an empty point set")
    mean = X.mean(axis=0)
    centered = X - mean
    if compute_basis:
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
    else:
        s = np.linalg.svd(centered, compute_uv=False)
        vt = np.empty((0, D))
    return SvdSummary(mean=mean, singular_values=s, basis=vt, count=n)


def total_variance(summary):
    """Sum of squared singular values; not normalized by the point count."""
    return float(np.sum(summary.singular_values**2))


def tail_variance(summary, d):
    """Sum of squared singular values beyond the first ``d``."""
    return float(np.sum(summary.singular_values[d:] ** 2))


def best_fit_affine(points, d, *, summary=None):
    """Least-squares ``d``-dimensional affine subspace through the centroid.

    If fewer than ``d`` singular directions exist (``n < d``), the basis is
    padded with an orthonormal completion; the padding does not change any
    residual because the centered points already lie in the leading span.
    """
    if summary is None:
        summary = center_and_svd(points)
    D = summary.dim
    d = int(d)
    if d < 0:
        raise ManifoldTestError("bad-dimension", f"d={d} is negative")
    if d > D:
        raise ManifoldTestError("dimension-exceeds-ambient", f"d={d} > D={D}")
    basis = summary.basis[:d]
    if basis.shape[0] < d:
        basis = _complete_basis(basis, d, D)
    return AffineSubspace(origin=summary.mean.copy(), basis=basis.copy())


def _complete_basis(basis, d, D):
    # QR of [basis; I] yields an orthonormal frame whose leading rows span basis.
    stacked = np.vstack([basis, np.eye(D)])
    q, _ = np.linalg.qr(stacked.T)
    out = q.T[:d]
    # Keep the original rows exactly (QR may flip signs).
    out[: basis.shape[0]] = basis
    return out


def residual_sqd_exact(points, subspace):
    """Sum over points of the squared Euclidean distance to ``subspace``."""
    X = check_cloud(points, allow_empty=True)
    if X.shape[0] == 0:
        return 0.0
    centered = X - subspace.origin
    # Removing the in-plane component is more accurate than |x - proj(x)|
    # when the points lie nearly on the subspace.
    resid = centered - (centered @ subspace.basis.T) @ subspace.basis
    return float(np.sum(resid * resid))
