import logging
from typing import Callable, Optional, Sequence

import numpy as np

from .cover import OUTER_RADIUS, CoverCombinatorics
from .rational import RationalFunction, RationalMatrix, TripleError, gaussian, gaussian_parts
from .triple import AnalyticMap, SingularPoint, TwistedTriple

logger = logging.getLogger(__name__)


def continuous_log(function: RationalFunction, base_point: complex = 0j,
                   radius: float = OUTER_RADIUS) -> Callable[[np.ndarray], np.ndarray]:
    """
    A branch of log G that is continuous on the disk of the given radius around the base point.

    Each linear factor contributes log(b - a) + log1p((z - b)/(b - a)), which is analytic while
    |z - b| < |b - a|.

    Raises:
        TripleError: G vanishes identically or has a zero or pole in the closed disk.
    """
    if function.is_zero:
        raise TripleError("log G needs G not identically zero.")
    base_point = complex(base_point)
    zeros, poles = function.zeros(), function.poles()
    for kind, roots in (('zero', zeros), ('pole', poles)):
        close = roots[np.abs(roots - base_point) <= radius]
        if close.size:
            raise TripleError(f"G has a {kind} at {complex(close[0]):.6g}, inside the disk of radius {radius} "
                              f"around {base_point}.")
    leading = np.log(function.leading_ratio())

    def log_factor(root: complex, z: np.ndarray) -> np.ndarray:
        offset = base_point - root
        return np.log(offset) + np.log1p((z - base_point) / offset)

    def evaluate(z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.full(z.shape, leading, dtype=complex)
        for root in zeros:
            out += log_factor(root, z)
        for root in poles:
            out -= log_factor(root, z)
        return out

    return evaluate


def rank_one_solution(function, bundle_degree: int, base_point: complex = 0j,
                      singularities: Optional[Sequence[SingularPoint]] = None) -> TwistedTriple:
    """
    Explicit line-bundle triple with monodromy G on every patch.

    With L a branch of log G continuous on the disk D_2 and d(a, b) the fiber advance from
    patch b to patch a, rho[a, b] = exp(d(a, b) L). Between consecutive sectors this is
    G^(1/(k+1)); from a sector s to the outer patch it is T_(0,s) G^(1/(2(k+1))) with
    T_(0,s) = G^(k log_s((z-b)^(k+1)) / (2 pi (k+1) i)). The pair and triple laws hold because
    the advances add up to whole turns.

    Raises:
        TripleError: G has a zero or pole on D_2.
    """
    function = RationalFunction.coerce(function)
    cover = CoverCombinatorics(bundle_degree, base_point)
    log_g = continuous_log(function, cover.base_point)

    def transition(target: int, source: int) -> AnalyticMap:
        def evaluate(z: np.ndarray) -> np.ndarray:
            return np.exp(cover.advance(target, source, z) * log_g(z))[..., None, None]
        return AnalyticMap(evaluate, 1, f"exp(d({target},{source}) log G)")

    monodromy = RationalMatrix([[function]])
    transitions = {pair: transition(*pair) for pair in cover.overlap_pairs}
    descriptor = {
        'kind': 'rank_one',
        'G': function.to_dict(),
        'k': cover.bundle_degree,
        'base_point': list(gaussian_parts(gaussian(cover.base_point))),
    }
    logger.info("Built rank-one triple for G = %s on k = %d", function.to_expr(), cover.bundle_degree)
    return TwistedTriple(cover, {label: monodromy for label in cover.labels}, transitions,
                         list(singularities or []), function, descriptor)
