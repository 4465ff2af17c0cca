"""Affine weighted moment invariants of grayscale images.

Combines global image moments with local affine differential invariants
into features that are invariant under nonsingular affine transforms of
the image plane, and ships a brute-force oracle that certifies every
closed-form expansion plus stability/retrieval experiment harnesses.
"""

__version__ = "0.1.0"

from .diffops import ADIFields, DiffConfig, DerivativeStack, adi_values, derivative_stack
from .invariants import (
    AMI_FEATURES,
    DEFAULT_FEATURES,
    FeatureVector,
    InvariantId,
    feature_vector,
)
from .moments import DMKey, DMTable, MomentTable, ZeroMassError, central_moment, centroid, geometric_moment
from .oracle import (
    CoreSpec,
    DCoreSpec,
    VerificationReport,
    eval_core,
    eval_dcore,
    verify_expansion,
    verify_zero_core,
)
from .raster import (
    AffineParams,
    Raster,
    RasterError,
    SyntheticSpec,
    TABLE4_TRANSFORMS,
    generate_synthetic,
    load_image,
    save_pgm,
    warp_affine,
)
from .retrieval import (
    PRCurve,
    RetrievalResult,
    RetrievalRun,
    StabilityReport,
    chi2_mod_distance,
    make_benchmark_dataset,
    run_retrieval,
    run_stability,
    stability_error,
    stability_images,
)

__all__ = [
    "ADIFields", "AffineParams", "AMI_FEATURES", "CoreSpec", "DCoreSpec",
    "DEFAULT_FEATURES", "DerivativeStack", "DiffConfig", "DMKey", "DMTable",
    "FeatureVector", "InvariantId", "MomentTable", "PRCurve", "Raster",
    "RasterError", "RetrievalResult", "RetrievalRun", "StabilityReport",
    "SyntheticSpec", "TABLE4_TRANSFORMS", "VerificationReport", "ZeroMassError",
    "adi_values", "central_moment", "centroid", "chi2_mod_distance",
    "derivative_stack", "eval_core", "eval_dcore", "feature_vector",
    "generate_synthetic", "geometric_moment", "load_image",
    "make_benchmark_dataset", "run_retrieval", "run_stability", "save_pgm",
    "stability_error", "stability_images", "verify_expansion",
    "verify_zero_core", "warp_affine",
]
