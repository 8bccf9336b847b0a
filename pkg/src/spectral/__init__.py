__version__ = "1.0.0"

from .curve import (
    ETA,
    SpectralError,
    SpectralCurveData,
    char_poly,
    discriminant,
    squarefree_check,
    branch_points,
)
from .monodromy import (
    Loop,
    MonodromyCertificate,
    default_loops,
    track_roots,
    monodromy_irreducibility,
)
from .eigenlines import (
    EigenlineSample,
    SpectralLift,
    TorsorDifference,
    eigenline_samples,
    pushforward_reconstruct,
    lift_cocycle,
    torsor_difference,
)
