import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment
from scipy.sparse.csgraph import connected_components

from .curve import SpectralCurveData, SpectralError, branch_points, squarefree_check

logger = logging.getLogger(__name__)


SEPARATION_FACTOR = 10.0
INITIAL_STEP = 1.0 / 32
MAX_STEP = 1.0 / 16
MIN_STEP = 1e-9
NEWTON_ITERATIONS = 30
NEWTON_TOLERANCE = 1e-13


@dataclass
class Loop:
    """A circle around a branch point, reached by a straight segment from the base point."""
    centre: complex
    radius: float

    def legs(self, base: complex) -> List[Callable[[float], complex]]:
        direction = (base - self.centre) / abs(base - self.centre)
        entry = self.centre + self.radius * direction
        start = np.angle(direction)
        return [
            lambda t: base + t * (entry - base),
            lambda t: self.centre + self.radius * np.exp(1j * (start + 2 * np.pi * t)),
            lambda t: entry + t * (base - entry),
        ]


@dataclass
class MonodromyCertificate:
    """
    Sheet permutations produced by continuing the roots of P(z, .) around each loop.

    Attributes:
        base_point (complex): Where every loop starts.
        loops (List[Loop]): The loops, one per branch point by default.
        permutations (List[Tuple[int, ...]]): Sheet j ends on sheet permutation[j].
        orbits (List[List[int]]): Orbits of the generated group on the sheets.
    """
    base_point: complex
    loops: List[Loop]
    permutations: List[Tuple[int, ...]]
    orbits: List[List[int]]

    @property
    def transitive(self) -> bool:
        return len(self.orbits) == 1

    def to_dict(self) -> Dict:
        return {
            'base_point': [self.base_point.real, self.base_point.imag],
            'loops': [{'centre': [loop.centre.real, loop.centre.imag], 'radius': loop.radius} for loop in self.loops],
            'permutations': [list(p) for p in self.permutations],
            'orbits': self.orbits,
            'transitive': self.transitive,
        }


def _newton(curve: SpectralCurveData, z: complex, guesses: np.ndarray) -> Tuple[np.ndarray, bool]:
    coefficients = curve.numeric_coefficients(z)
    derivative = np.polyder(coefficients)
    roots = guesses.copy()
    for _ in range(NEWTON_ITERATIONS):
        slope = np.polyval(derivative, roots)
        if np.any(np.abs(slope) < 1e-300):
            return roots, False
        step = np.polyval(coefficients, roots) / slope
        roots = roots - step
        if np.max(np.abs(step)) <= NEWTON_TOLERANCE * max(1.0, float(np.max(np.abs(roots)))):
            return roots, True
    return roots, False


def _separation(roots: np.ndarray) -> float:
    if roots.size < 2:
        return np.inf
    gaps = np.abs(roots[:, None] - roots[None, :])
    return float(np.min(gaps[~np.eye(roots.size, dtype=bool)]))


def track_roots(curve: SpectralCurveData, path: Callable[[float], complex], roots: np.ndarray) -> np.ndarray:
    """
    Continue the roots of P(z, .) along z = path(t), t from 0 to 1, by predictor-corrector
    steps: the roots at the previous point seed Newton at the next one. A step is halved when
    Newton fails or when any root moves by more than a tenth of the smallest root separation.

    Raises:
        SpectralError: the step falls below MIN_STEP, i.e. the path runs into a branch point.
    """
    roots = np.asarray(roots, dtype=complex)
    t, step = 0.0, INITIAL_STEP
    while t < 1.0:
        step = min(step, 1.0 - t)
        candidate, converged = _newton(curve, path(t + step), roots)
        motion = float(np.max(np.abs(candidate - roots)))
        if converged and SEPARATION_FACTOR * motion < _separation(candidate):
            roots, t = candidate, t + step
            step = min(1.5 * step, MAX_STEP)
            continue
        step /= 2
        if step < MIN_STEP:
            raise SpectralError(f"Root continuation stalled near z = {path(t):.6g}; the path meets a branch point.")
    return roots


def _match(start: np.ndarray, end: np.ndarray) -> Tuple[int, ...]:
    cost = np.abs(start[:, None] - end[None, :])
    rows, columns = linear_sum_assignment(cost)
    scale = max(1.0, float(np.max(np.abs(start))))
    if np.max(cost[rows, columns]) > 1e-6 * scale:
        raise SpectralError("Continued roots do not return to the fiber over the base point.")
    permutation = np.empty(start.size, dtype=int)
    permutation[rows] = columns
    return tuple(int(p) for p in permutation)


def default_loops(points: np.ndarray, base_point: complex) -> List[Loop]:
    """One circle per branch point, of radius half the distance to the nearest other branch point or to the base."""
    loops = []
    for index, centre in enumerate(points):
        distances = [abs(centre - other) for j, other in enumerate(points) if j != index]
        distances.append(abs(centre - base_point))
        loops.append(Loop(complex(centre), 0.5 * min(distances)))
    return loops


def monodromy_irreducibility(curve: SpectralCurveData,
                             base_point: complex,
                             loops: Optional[Sequence[Loop]] = None) -> MonodromyCertificate:
    """
    Decide irreducibility from the sheet permutations around the branch points: the curve is
    irreducible exactly when the permutations act transitively on the sheets.

    Raises:
        SpectralError: the curve is not squarefree, the base point is a branch point, or a loop
            passes through a branch point.
    """
    if curve.squarefree is None:
        squarefree_check(curve)
    if not curve.squarefree:
        raise SpectralError("Monodromy needs a squarefree spectral curve.")
    base_point = complex(base_point)
    start = np.sort_complex(curve.roots(base_point))
    if start.size != curve.degree or _separation(start) < 1e-8 * max(1.0, float(np.max(np.abs(start)))):
        raise SpectralError(f"Base point {base_point} lies on or near a branch point.")
    if loops is None:
        loops = default_loops(branch_points(curve), base_point)

    permutations = []
    for loop in loops:
        roots = start
        for leg in loop.legs(base_point):
            roots = track_roots(curve, leg, roots)
        permutation = _match(start, roots)
        logger.debug("Loop around %s: permutation %s", loop.centre, permutation)
        permutations.append(permutation)

    sheets = curve.degree
    rows = [j for p in permutations for j in range(sheets)]
    columns = [p[j] for p in permutations for j in range(sheets)]
    graph = sparse.coo_matrix((np.ones(len(rows)), (rows, columns)), shape=(sheets, sheets))
    count, labels = connected_components(graph, directed=True, connection='weak')
    orbits = [sorted(int(j) for j in np.flatnonzero(labels == label)) for label in range(count)]
    certificate = MonodromyCertificate(base_point, list(loops), permutations, orbits)
    curve.irreducible = certificate.transitive
    curve.certificate = certificate
    logger.info("Monodromy at %s: %d loops, %d orbit(s)", base_point, len(loops), count)
    return certificate
