"""Numerical invariant distances and metrics on model domains in C^n.

Lempert, Kobayashi and Caratheodory distances and their infinitesimal
forms, computed by certified extremal-problem optimization over analytic
discs and holomorphic functionals, together with empirical suites for the
comparison inequalities, localization bounds, visibility and strong
completeness of the model domains.
"""

from . import _kernels
from .bounds import (
    ComparisonReport,
    LocalizationSetup,
    check_localization,
    check_theorem_global,
    f_bound,
    fit_constant,
    g_bound,
    h_eval,
    verify_classical,
)
from .closed_forms import (
    annulus_distance,
    disc_gromov_lower,
    model_distance,
    model_metric,
    poincare_distance,
)
from .domains import (
    Annulus,
    Ball,
    ComplexEllipsoid,
    Domain,
    HalfPlane,
    Intersection,
    Polydisc,
    Tangent,
    UnitDisc,
    Window,
    disc_free_certificate,
    domain_from_json,
    m_convexity_probe,
    sample_pair_near,
    strict_c_convexity_probe,
)
from .errors import (
    CapabilityError,
    GeodesicRejection,
    InvmetError,
    OutsideDomainError,
    SamplingError,
    SetupError,
    SolverFailure,
    TopologyError,
)
from .extremal import (
    AnalyticDisc,
    Bracket,
    ScalarFunctional,
    SolverConfig,
    caratheodory_lower,
    caratheodory_metric_lower,
    kobayashi_distance_upper,
    kobayashi_metric_upper,
    lempert_upper,
    sandwich,
)
from .geodesics import (
    ComplexGeodesicDisc,
    GromovRecord,
    RealGeodesicPath,
    boundary_extension_check,
    complex_geodesic,
    equicontinuity_modulus,
    gromov_product,
    normalize_star,
    real_geodesic,
    strong_completeness_probe,
    verify_complex_geodesic,
    visibility_classify,
)

__version__ = "0.1.0"

kernel_backend = _kernels.backend_name
