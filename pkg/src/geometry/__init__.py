__version__ = "1.0.0"

from .atlas import (
    SurfaceChartAtlas,
    GeometryError,
    FIELD_WEIGHTS,
    build_atlas,
    smooth_step,
)
from .operators import (
    GauduchonForm,
    DIRECTIONS,
    scalar_field,
    fiber_derivative,
    frame_apply,
    covariant_apply,
    laplacian,
    integrate,
    volume,
    base_area,
    owned_sup,
    pointwise_norm,
    gauduchon_residual,
    overlap_residual,
    commutator_residuals,
    inner_product,
    gradient_energy,
    integration_by_parts_defect,
    convergence_ratio,
    curvature_density,
    field_rows,
)
from .random_fields import FieldGenerator, admissible_monomials
from .assembly import ModeOperator, mode_laplacian, synchronization_matrix, ResolventSolver
