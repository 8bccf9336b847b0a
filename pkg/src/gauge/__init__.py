__version__ = "1.0.0"

from .connection import (
    GaugeError,
    DiracSingularitySpec,
    UnitaryConnection,
    dagger,
    identity_field,
    trivial_connection,
    contact_connection,
    random_connection,
    random_unitary_gauge,
    unitary_exponential,
    gauge_transform,
    direct_sum,
    compress,
)
from .dirac import (
    DiracLocalModel,
    dirac_local_model,
    verify_dirac_model,
    excision_mask,
    geodesic_distance,
    validate_singularities,
)
from .curvature import (
    CurvatureDecomposition,
    curvature,
    he_residual,
    dolbeault_residual,
    degree,
    slope,
    subbundle_slope_excess,
    weitzenbock_residual,
    meromorphic_section_residual,
    bump_flux,
    bump_shift_constant,
    excised_sup,
)
