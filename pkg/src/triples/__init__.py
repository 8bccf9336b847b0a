__version__ = "1.0.0"

from .rational import (
    Z,
    INFINITY,
    TripleError,
    RationalFunction,
    RationalMatrix,
    gaussian,
    block_diagonal,
    pole_type,
)
from .cover import CoverCombinatorics, OverlapComponent, SECTOR_EPSILON
from .cocycle import LineCocycle
from .triple import (
    AnalyticMap,
    SingularPoint,
    TwistedTriple,
    IdentityCheck,
    ValidationReport,
    AbelVerdict,
    exact_triple,
    complete_transitions,
    validate_triple,
    picard_twist,
    gauge_transform,
    direct_sum,
    abel_check,
    he_constant_shift,
)
from .rank_one import continuous_log, rank_one_solution
from .serialization import (
    triple_to_dict,
    triple_from_dict,
    save_document,
    load_document,
    load_triple,
    load_cocycle,
)


def build_cover(bundle_degree: int, base_point: complex = 0j) -> CoverCombinatorics:
    return CoverCombinatorics(bundle_degree, base_point)
