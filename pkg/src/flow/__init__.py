__version__ = "1.0.0"

from .structure import (
    FlowError,
    FlowStalled,
    FlowDiverged,
    MeromorphicStructureData,
    BundleMetric,
    structure_from_connection,
    trivial_structure,
    diagonal_structure,
    contact_structure,
    complex_gauge,
    exponential_gauge,
    structure_direct_sum,
    sub_structure,
    identity_metric,
    metric_from_log,
    random_metric,
    chern_connection,
)
from .heat_flow import (
    FlowState,
    FlowResult,
    SCHEMES,
    hermite_einstein_constant,
    automatic_step,
    flow_velocity,
    initial_state,
    flow_step,
    run_flow,
    det_drift,
    log_det_integral,
)
from .oracle import poisson_oracle
from .isomorphism import IsomorphismVerdict, isomorphism_check
