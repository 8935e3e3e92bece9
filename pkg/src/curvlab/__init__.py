"""curvlab: a numerical laboratory for three families of complete
pseudo-Riemannian metrics with nilpotent curvature operators.

The package computes metrics, connection coefficients, curvature tensors and
their covariant derivatives from first principles, matches them pointwise
against constant model structures, probes operator Jordan type over causal
classes, integrates geodesics exactly through the triangular connection
structure, and scans the derivative-curvature invariants that obstruct
higher-order homogeneity.
"""

__version__ = "0.1.0"

from ._kernels import backend
from .core import (
    COV,
    CON,
    BilinearForm,
    LinearMap,
    MultiProfile,
    ScalarProfile,
    Signature,
    Tensor,
    contract,
    eval_profile,
    profile_from_json,
    pullback,
    signature_of,
)
from .families import (
    Family1,
    Family2,
    Family3,
    FamilySpec,
    christoffel_oracle,
    curvature_oracle,
    metric_at,
    metric_partials,
    spec_from_json,
    spec_to_json,
)
from .curvature import (
    CurvaturePackage,
    check_curvature_symmetries,
    check_nabla_symmetries,
    christoffels,
    covariant_derivative_R,
    curvature_package,
    riemann,
    second_covariant_derivative_R,
)
from .operators import (
    Endomorphism,
    SamplerConfig,
    ip_probe,
    jacobi,
    jordan_probe,
    nilpotency_index,
    orthonormalize_plane,
    rank_sequence,
    ricci,
    sample_unit_vectors,
    skew_curvature_operator,
)
from .models import (
    ModelSpace,
    NormalizedBasis,
    annihilator,
    build_model,
    build_reduced_model,
    curvature_from_bilinear,
    irreducibility_witness_probe,
    normalize,
    normalize_family1,
    normalize_family2,
    normalize_family3,
    verify_model_match,
)
from .homogeneity import (
    KPClass,
    KPLabel,
    alpha1,
    alpha1_brute,
    alpha2,
    constancy_scan,
    kp_classify,
    kp_scan,
)
from .geodesics import (
    Geodesic,
    TriangularOrder,
    energy_along,
    exp_map,
    geodesic_symmetry,
    integrate_recursive,
    integrate_rk4,
    integrate_rk4_batch,
    isometry_check,
    log_map,
    triangular_order,
)
