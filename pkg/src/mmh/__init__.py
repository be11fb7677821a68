"""Multiscale testing of the multi-manifold hypothesis on point clouds."""

from .core import (
    AffineSubspace,
    SvdSummary,
    best_fit_affine,
    center_and_svd,
    residual_sqd_exact,
    total_variance,
)
from .datagen import SphereLineSpec, gen_sphere_line
from .errors import ManifoldTestError
from .estimators import (
    DyadicLinearMultiManifold,
    LocalDimensionEstimator,
    LocalGMST,
    MultiManifoldTest,
)
from .hypothesis import (
    Decision,
    SqdReport,
    TestConfig,
    TestDistribution,
    decide,
    full_test,
    resample_distribution,
    sqd_component,
    sqd_total,
)
from .idim import (
    IdParams,
    LocalIdRecord,
    Strata,
    compute_all_ids,
    d_vid,
    d_vlid,
    diagnostic_encodings,
    gmst_edge_length,
    gmst_local_dimension,
    stratify,
)
from .io import export_labeled, load_cloud, save_cloud
from .multimanifold import BuildParams, MultiManifold, build_multimanifold, locate_leaf
from .neighborhoods import (
    NeighborhoodSpec,
    arithmetic_radii,
    ball_neighborhood,
    dyadic_radii,
    knn_neighborhood,
)

__all__ = [
    "AffineSubspace",
    "SvdSummary",
    "best_fit_affine",
    "center_and_svd",
    "residual_sqd_exact",
    "total_variance",
    "SphereLineSpec",
    "gen_sphere_line",
    "ManifoldTestError",
    "DyadicLinearMultiManifold",
    "LocalDimensionEstimator",
    "LocalGMST",
    "MultiManifoldTest",
    "Decision",
    "SqdReport",
    "TestConfig",
    "TestDistribution",
    "decide",
    "full_test",
    "resample_distribution",
    "sqd_component",
    "sqd_total",
    "IdParams",
    "LocalIdRecord",
    "Strata",
    "compute_all_ids",
    "d_vid",
    "d_vlid",
    "diagnostic_encodings",
    "gmst_edge_length",
    "gmst_local_dimension",
    "stratify",
    "export_labeled",
    "load_cloud",
    "save_cloud",
    "BuildParams",
    "MultiManifold",
    "build_multimanifold",
    "locate_leaf",
    "NeighborhoodSpec",
    "arithmetic_radii",
    "ball_neighborhood",
    "dyadic_radii",
    "knn_neighborhood",
]

__version__ = "0.1.0"
