"""Spherically symmetric Finsler metrics: sprays, Berwald and Landsberg tests.

A metric ``F = u * phi(r, s)`` with ``r = |x|``, ``u = |y|`` and
``s = <x, y>/|y|`` is described by a :class:`PhiModel`.  Its Taylor jets feed
exact-arithmetic formulas for the spray, the Berwald curvature and the
mean Berwald curvature; :mod:`ssfinsler.oracle` recomputes the same objects
by finite differences.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DomainError,
    FinslerError,
    FitError,
    JetDivisionError,
    ParseError,
    ShapeError,
    SingularMetricError,
)
from .expr import parse_expr, parse_phi, pretty  # noqa: E402
from .families import (  # noqa: E402
    FAMILIES,
    Classification,
    CoefFns,
    FitResult,
    GridSpec,
    berwald_pq_n3,
    berwald_pq_surface,
    c1_denominator,
    classify,
    fit_family,
    fit_model,
    landsberg_pq_n3,
    lc2_contradiction,
    riemannian_residual,
)
from .geometry import (  # noqa: E402
    Config,
    berwald_curvature,
    berwald_trace,
    compatibility_residuals,
    inverse_metric,
    landsberg_surface_residual,
    mean_berwald_direct,
    mean_berwald_H,
    metric,
    scalar_HK,
    spray_coeffs,
    spray_pq,
    tensor_bundle,
)
from .jets import Jet2, JetShape  # noqa: E402
from .models import (  # noqa: E402
    CATALOG,
    Euclidean,
    Expression,
    Homogeneous,
    PhiModel,
    PsiFamily,
    Riemannian,
    catalog_list,
    eval_phi_jet,
    make_model,
    regularity_check,
)
from .oracle import FDScheme, compare, fd_berwald, fd_phi_derivs  # noqa: E402
