"""Synthetic sphere-plus-line clouds and other small test geometries."""

from dataclasses import dataclass

import numpy as np

from .errors import ManifoldTestError

__all__ = ["SphereLineSpec", "gen_sphere_line", "sample_affine_patch"]


@dataclass(frozen=True)
class SphereLineSpec:
    """A sphere centered at the origin plus two x-axis segments outside it.

    Sphere points are drawn uniformly in (azimuth, polar angle), which is
    deliberately not uniform in surface area: density piles up at the poles
    (the z axis). ``area_uniform=True`` draws the polar angle with the
    arccos correction instead.
    """

    n_sphere: int = 2513
    n_line: int = 193
    radius: float = 0.5
    line_intervals: tuple = ((-1.0, -0.5), (0.5, 1.0))
    seed: int = 0
    area_uniform: bool = False

    def __post_init__(self):
        if self.n_sphere < 0 or self.n_line < 0:
            raise ManifoldTestError("bad-count", "point counts must be >= 0")
        if self.radius <= 0:
            raise ManifoldTestError("bad-radius", f"radius={self.radius}")
        for lo, hi in self.line_intervals:
            if not hi > lo:
                raise ManifoldTestError("bad-interval", f"[{lo}, {hi}] is degenerate")
            if lo < self.radius and hi > -self.radius:
                raise ManifoldTestError(
                    "bad-interval", f"[{lo}, {hi}] enters the open ball of radius {self.radius}"
                )


def gen_sphere_line(spec=SphereLineSpec()):
    """Sample ``spec.n_sphere`` sphere points followed by ``spec.n_line`` line points."""
    rng = np.random.default_rng(spec.seed)
    phi = rng.uniform(0.0, 2.0 * np.pi, spec.n_sphere)
    if spec.area_uniform:
        theta = np.arccos(1.0 - 2.0 * rng.uniform(0.0, 1.0, spec.n_sphere))
    else:
        theta = rng.uniform(0.0, np.pi, spec.n_sphere)
    r = spec.radius
    sphere = np.column_stack(
        [r * np.sin(theta) * np.cos(phi), r * np.sin(theta) * np.sin(phi), r * np.cos(theta)]
    )

    intervals = np.asarray(spec.line_intervals, dtype=float)
    lengths = intervals[:, 1] - intervals[:, 0]
    which = rng.choice(len(intervals), size=spec.n_line, p=lengths / lengths.sum())
    u = rng.uniform(0.0, 1.0, spec.n_line)
    x = intervals[which, 0] + u * lengths[which]
    # Guard against the upper endpoint being hit through rounding.
    x = np.minimum(x, intervals[which, 1])
    line = np.column_stack([x, np.zeros(spec.n_line), np.zeros(spec.n_line)])
    return np.vstack([sphere, line])


def sample_affine_patch(n, d, D, *, random_state=None, scale=1.0, offset=None):
    """``n`` points uniform in a d-cube lying exactly on a random d-plane of R^D."""
    rng = np.random.default_rng(random_state)
    if not 0 <= d <= D:
        raise ManifoldTestError("dimension-exceeds-ambient", f"d={d}, D={D}")
    q, _ = np.linalg.qr(rng.standard_normal((D, D)))
    basis = q[:, :d].T
    coords = rng.uniform(-scale, scale, (n, d))
    origin = rng.standard_normal(D) if offset is None else np.asarray(offset, dtype=float)
    return origin + coords @ basis
