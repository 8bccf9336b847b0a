import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .cocycle import LineCocycle
from .cover import CoverCombinatorics
from .rational import (
    INFINITY,
    RationalFunction,
    RationalMatrix,
    TripleError,
    block_diagonal,
    gaussian,
    gaussian_parts,
)

logger = logging.getLogger(__name__)


SAMPLED_TOLERANCE = 1e-9
DEFAULT_SAMPLES = 200


class AnalyticMap:
    """
    A matrix-valued holomorphic map known only through evaluation, such as a branch of G^(1/(k+1)).

    Attributes:
        function (Callable): Maps an array of points to an array of shape z.shape + (n, n).
        size (int): n.
        description (str): Human-readable formula.
    """

    def __init__(self, function: Callable[[np.ndarray], np.ndarray], size: int, description: str = '') -> None:
        self.function = function
        self.size = int(size)
        self.description = description

    def __repr__(self) -> str:
        return f"AnalyticMap({self.description or 'closure'}, size={self.size})"

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.asarray(self.function(z), dtype=complex).reshape(z.shape + (self.size, self.size))


Map = Union[RationalMatrix, AnalyticMap]


def _product(left: Map, right: Map) -> Map:
    if isinstance(left, RationalMatrix) and isinstance(right, RationalMatrix):
        return left @ right
    return AnalyticMap(lambda z: left(z) @ right(z), left.size, f"{left!r} {right!r}")


@dataclass(frozen=True)
class SingularPoint:
    """
    A Dirac singularity seen from the base: the point q under it, the fiber positions of the
    singular points over q and the weights.

    Attributes:
        point (Union[complex, str]): q, or 'inf'.
        theta (Tuple[float, ...]): Fiber positions; metadata for the constant shift.
        weights (Tuple[int, ...]): Weight vector k.
    """
    point: Union[complex, str]
    theta: Tuple[float, ...] = (0.0,)
    weights: Tuple[int, ...] = (1,)

    @property
    def trace(self) -> int:
        return int(sum(self.weights))

    @property
    def key(self) -> str:
        if self.point == INFINITY:
            return INFINITY
        real, imag = gaussian_parts(gaussian(self.point))
        return f"{real}{'+' if not imag.startswith('-') else ''}{imag}i"

    def to_dict(self) -> Dict:
        point = INFINITY if self.point == INFINITY else [self.point.real, self.point.imag]
        return {'point': point, 'theta': list(self.theta), 'weights': list(self.weights)}

    @classmethod
    def from_dict(cls, data: Dict) -> "SingularPoint":
        point = data['point']
        if point != INFINITY:
            point = complex(point[0], point[1]) if isinstance(point, (list, tuple)) else complex(point)
        theta = data.get('theta', [0.0])
        theta = tuple(float(t) for t in (theta if isinstance(theta, (list, tuple)) else [theta]))
        return cls(point, theta, tuple(int(w) for w in data.get('weights', [1])))


@dataclass
class TwistedTriple:
    """
    Bundle data on the cover of the base curve: a monodromy G[a] per patch and a map
    rho[(a, b)] : E_b -> E_a per ordered overlap, subject to the twisted cocycle laws.

    Attributes:
        cover (CoverCombinatorics): Patches, overlaps and twist bits.
        monodromy (Dict[int, Map]): G per patch label.
        transitions (Dict[Tuple[int, int], Map]): rho per ordered overlap.
        singularities (List[SingularPoint]): Singular data under the bundle.
        determinant (Optional[RationalFunction]): det G when the maps are not rational.
        descriptor (Optional[Dict]): How an analytic triple was built, for serialization.
    """
    cover: CoverCombinatorics
    monodromy: Dict[int, Map]
    transitions: Dict[Tuple[int, int], Map]
    singularities: List[SingularPoint] = field(default_factory=list)
    determinant: Optional[RationalFunction] = None
    descriptor: Optional[Dict] = None

    def __post_init__(self) -> None:
        missing = [label for label in self.cover.labels if label not in self.monodromy]
        if missing:
            raise TripleError(f"Triple has no monodromy on patches {missing}.")
        missing = [pair for pair in self.cover.overlap_pairs if pair not in self.transitions]
        if missing:
            raise TripleError(f"Triple has no transition on overlaps {missing}.")
        sizes = {m.size for m in itertools.chain(self.monodromy.values(), self.transitions.values())}
        if len(sizes) != 1:
            raise TripleError(f"Triple maps have mixed sizes {sorted(sizes)}.")

    @property
    def rank(self) -> int:
        return self.monodromy[0].size

    @property
    def is_exact(self) -> bool:
        return all(isinstance(m, RationalMatrix)
                   for m in itertools.chain(self.monodromy.values(), self.transitions.values()))

    def rho(self, target: int, source: int) -> Map:
        return self.transitions[(target, source)]

    def determinant_function(self) -> RationalFunction:
        """det G, which is the same function on every patch."""
        if isinstance(self.monodromy[0], RationalMatrix):
            return self.monodromy[0].det()
        if self.determinant is None:
            raise TripleError("Analytic triple carries no determinant.")
        return self.determinant

    def replace(self, **changes) -> "TwistedTriple":
        values = dict(cover=self.cover, monodromy=dict(self.monodromy), transitions=dict(self.transitions),
                      singularities=list(self.singularities), determinant=self.determinant, descriptor=None)
        values.update(changes)
        return TwistedTriple(**values)


def exact_triple(cover: CoverCombinatorics,
                 monodromy: RationalMatrix,
                 transitions: Optional[Dict[Tuple[int, int], RationalMatrix]] = None,
                 singularities: Sequence[SingularPoint] = ()) -> TwistedTriple:
    """
    A triple with the same rational G on every patch. A missing rho[a, b] is taken from the pair
    law when rho[b, a] is given, and otherwise is the identity for a < b and G for a > b.
    """
    monodromy = RationalMatrix.coerce(monodromy)
    patches = {label: monodromy for label in cover.labels}
    return TwistedTriple(cover, patches, complete_transitions(cover, patches, transitions), list(singularities))


def complete_transitions(cover: CoverCombinatorics,
                         monodromy: Dict[int, RationalMatrix],
                         transitions: Optional[Dict[Tuple[int, int], RationalMatrix]]) -> Dict[Tuple[int, int], RationalMatrix]:
    transitions = dict(transitions or {})
    identity = RationalMatrix.identity(monodromy[0].size)
    for a, b in cover.overlap_pairs:
        if (a, b) in transitions:
            continue
        if (b, a) in transitions:
            transitions[(a, b)] = monodromy[a] @ transitions[(b, a)].inverse()
        else:
            transitions[(a, b)] = identity if a < b else monodromy[a]
    return transitions


# Validation


@dataclass
class IdentityCheck:
    name: str
    residual: float
    passed: bool


@dataclass
class ValidationReport:
    """
    Outcome of checking every cocycle identity of a triple.

    Attributes:
        exact (bool): Identities were decided in exact arithmetic.
        checks (List[IdentityCheck]): One entry per identity.
        samples (int): Points per identity in sampled mode.
    """
    exact: bool
    checks: List[IdentityCheck]
    samples: int = 0

    @property
    def valid(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def violations(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]

    @property
    def max_residual(self) -> float:
        return max((check.residual for check in self.checks), default=0.0)

    def to_dict(self) -> Dict:
        return {
            'exact': self.exact,
            'valid': self.valid,
            'samples': self.samples,
            'max_residual': self.max_residual,
            'violations': self.violations,
            'checks': [{'name': c.name, 'residual': c.residual, 'passed': c.passed} for c in self.checks],
        }


def _residual(left: np.ndarray, right: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(right))))
    return float(np.max(np.abs(left - right)) / scale)


def validate_triple(triple: TwistedTriple,
                    samples: int = DEFAULT_SAMPLES,
                    seed: int = 0,
                    tolerance: float = SAMPLED_TOLERANCE) -> ValidationReport:
    """
    Check the pair law rho[a,b] rho[b,a] = G[a], the conjugacy G[b] rho[b,a] = rho[b,a] G[a]
    and, on every component of every triple overlap, the triple law with the cover's twist bit.

    Rational triples are decided exactly; the residuals reported for them come from the same
    sample points. Analytic triples pass when the relative sampled residual is below tolerance.
    Violations are report content; nothing is raised.
    """
    cover = triple.cover
    exact = triple.is_exact
    rng = np.random.default_rng(seed)
    checks: List[IdentityCheck] = []

    def check(name: str, left: Map, right: Map, window) -> None:
        points = cover.sample(window, samples, rng)
        residual = _residual(left(points), right(points))
        if exact:
            passed = left == right
        else:
            passed = bool(np.isfinite(residual) and residual < tolerance)
        checks.append(IdentityCheck(name, residual, bool(passed)))

    for a, b in cover.overlap_pairs:
        window = cover.pair_window(a, b)
        check(f"rho[{a},{b}] rho[{b},{a}] = G[{a}]",
              _product(triple.rho(a, b), triple.rho(b, a)), triple.monodromy[a], window)
        check(f"G[{b}] rho[{b},{a}] = rho[{b},{a}] G[{a}]",
              _product(triple.monodromy[b], triple.rho(b, a)), _product(triple.rho(b, a), triple.monodromy[a]),
              window)

    twists = cover.twist_table()
    for index, component in enumerate(cover.components):
        for first, middle, last in itertools.permutations(component.labels):
            bit = twists[(first, middle, last, index)]
            right = triple.rho(first, last)
            name = f"rho[{first},{middle}] rho[{middle},{last}] = rho[{first},{last}]"
            if bit:
                right = _product(right, triple.monodromy[last])
                name += f" G[{last}]"
            check(f"{name} on component {index}", _product(triple.rho(first, middle), triple.rho(middle, last)),
                  right, component)

    if triple.descriptor is not None and triple.descriptor.get('kind') == 'rank_one':
        checks.extend(_branch_checks(cover, samples, rng))

    report = ValidationReport(exact, checks, 0 if exact else samples)
    logger.info("Validated %d identities (%s): %d violated, max residual %.3e",
                len(checks), 'exact' if exact else 'sampled', len(report.violations), report.max_residual)
    return report


def _branch_checks(cover: CoverCombinatorics, samples: int, rng: np.random.Generator) -> List[IdentityCheck]:
    """Imaginary parts of log_s((z-b)^(k+1)) stay within the sector's range, widened by epsilon."""
    slack = cover.sectors * np.arcsin(min(cover.epsilon, 1.0))
    checks = []
    for sector in range(1, cover.sectors + 1):
        points = cover.sample(cover.pair_window(0, sector), samples, rng)
        imaginary = cover.log_branch(sector, points).imag
        excess = float(max(np.max(-slack - imaginary), np.max(imaginary - 2 * np.pi - slack), 0.0))
        checks.append(IdentityCheck(f"branch of log_{sector} on U_0 and U_{sector}", excess, excess == 0.0))
    return checks


# Picard action and constructions


def picard_twist(triple: TwistedTriple, cocycle: LineCocycle) -> TwistedTriple:
    """
    Tensor a triple with a line bundle: rho[a, b] -> rho[a, b] T[a, b], G unchanged.

    Raises:
        TripleError: the cocycle lives on another cover or fails the ordinary cocycle law.
    """
    if cocycle.cover.bundle_degree != triple.cover.bundle_degree:
        raise TripleError("Line cocycle and triple use different covers.")
    violations = cocycle.validate()
    if violations:
        raise TripleError(f"Line cocycle fails the cocycle identity: {violations}")
    transitions = {}
    for pair, rho in triple.transitions.items():
        factor = cocycle[pair]
        if isinstance(rho, RationalMatrix):
            transitions[pair] = rho.scale(factor)
        else:
            transitions[pair] = AnalyticMap(lambda z, rho=rho, factor=factor: rho(z) * factor(z)[..., None, None],
                                            rho.size, f"{rho!r} * ({factor.to_expr()})")
    descriptor = None
    if triple.descriptor is not None:
        descriptor = dict(triple.descriptor, twists=list(triple.descriptor.get('twists', [])) + [cocycle.to_dict()])
    return triple.replace(transitions=transitions, descriptor=descriptor)


def gauge_transform(triple: TwistedTriple, gauges: Dict[int, RationalMatrix]) -> TwistedTriple:
    """Change of trivialization g per patch: G[a] -> g_a^-1 G[a] g_a, rho[a, b] -> g_a^-1 rho[a, b] g_b."""
    gauges = {label: RationalMatrix.coerce(g) for label, g in gauges.items()}
    identity = RationalMatrix.identity(triple.rank)
    for label in triple.cover.labels:
        gauges.setdefault(label, identity)
    inverses = {label: g.inverse() for label, g in gauges.items()}
    monodromy = {a: _product(_product(inverses[a], g), gauges[a]) for a, g in triple.monodromy.items()}
    transitions = {(a, b): _product(_product(inverses[a], rho), gauges[b])
                   for (a, b), rho in triple.transitions.items()}
    return triple.replace(monodromy=monodromy, transitions=transitions)


def _block_map(maps: Sequence[Map]) -> Map:
    if all(isinstance(m, RationalMatrix) for m in maps):
        return block_diagonal(maps)
    size = sum(m.size for m in maps)

    def evaluate(z: np.ndarray) -> np.ndarray:
        out = np.zeros(z.shape + (size, size), dtype=complex)
        offset = 0
        for m in maps:
            out[..., offset:offset + m.size, offset:offset + m.size] = m(z)
            offset += m.size
        return out

    return AnalyticMap(evaluate, size, ' + '.join(repr(m) for m in maps))


def direct_sum(triples: Sequence[TwistedTriple]) -> TwistedTriple:
    """Block-diagonal sum of triples on one cover; weights at a shared point are concatenated."""
    if not triples:
        raise TripleError("Direct sum of no triples.")
    cover = triples[0].cover
    for other in triples[1:]:
        if (other.cover.bundle_degree, other.cover.base_point) != (cover.bundle_degree, cover.base_point):
            raise TripleError("Direct sum needs triples on the same cover.")

    merged: Dict[str, List[SingularPoint]] = defaultdict(list)
    for triple in triples:
        for point in triple.singularities:
            merged[point.key].append(point)
    singularities = [SingularPoint(group[0].point,
                                   tuple(itertools.chain.from_iterable(p.theta for p in group)),
                                   tuple(itertools.chain.from_iterable(p.weights for p in group)))
                     for group in merged.values()]

    determinant = None
    if not all(t.is_exact for t in triples):
        determinant = RationalFunction.constant(1)
        for triple in triples:
            determinant = determinant * triple.determinant_function()
    return TwistedTriple(
        cover,
        {label: _block_map([t.monodromy[label] for t in triples]) for label in cover.labels},
        {pair: _block_map([t.transitions[pair] for t in triples]) for pair in cover.overlap_pairs},
        singularities,
        determinant,
    )


# Divisors and constants


@dataclass
class AbelVerdict:
    """
    Comparison of div(det G) with the declared singular divisor on the projective line.

    Attributes:
        passed (bool): Orders agree everywhere and the total degree is zero.
        orders (Dict[str, int]): Order of det G at each declared point.
        declared (Dict[str, int]): Sum of traces of weights at each declared point.
        undeclared_zeros (int): Zeros of det G away from the declared points.
        undeclared_poles (int): Poles of det G away from the declared points.
        total (int): Degree of the declared divisor.
        problems (List[str]): Human-readable mismatches.
    """
    passed: bool
    orders: Dict[str, int]
    declared: Dict[str, int]
    undeclared_zeros: int
    undeclared_poles: int
    total: int
    problems: List[str]

    def to_dict(self) -> Dict:
        return {
            'passed': self.passed,
            'orders': self.orders,
            'declared': self.declared,
            'undeclared_zeros': self.undeclared_zeros,
            'undeclared_poles': self.undeclared_poles,
            'total': self.total,
            'problems': self.problems,
        }


def abel_check(triple: TwistedTriple) -> AbelVerdict:
    """
    On the projective line a divisor is principal exactly when its degree is zero, so the
    check is that det G vanishes to order tr(k_i) at each q_i, nowhere else, and that the
    traces sum to zero.
    """
    determinant = triple.determinant_function()
    if determinant.is_zero:
        return AbelVerdict(False, {}, {}, 0, 0, 0, ['det G vanishes identically'])
    declared: Dict[str, int] = defaultdict(int)
    points: Dict[str, Union[complex, str]] = {}
    for singular in triple.singularities:
        declared[singular.key] += singular.trace
        points[singular.key] = singular.point

    orders = {key: determinant.order_at(INFINITY if point == INFINITY else gaussian(point))
              for key, point in points.items()}
    problems = [f"order of det G at {key} is {orders[key]}, declared {declared[key]}"
                for key in sorted(declared) if orders[key] != declared[key]]

    finite = [key for key in orders if key != INFINITY]
    undeclared_zeros = determinant.numerator.degree() - sum(max(orders[key], 0) for key in finite)
    undeclared_poles = determinant.denominator.degree() - sum(max(-orders[key], 0) for key in finite)
    if undeclared_zeros:
        problems.append(f"det G has {undeclared_zeros} undeclared zeros")
    if undeclared_poles:
        problems.append(f"det G has {undeclared_poles} undeclared poles")
    if INFINITY not in orders and determinant.order_at(INFINITY) != 0:
        problems.append(f"det G has order {determinant.order_at(INFINITY)} at inf, which is undeclared")

    total = int(sum(declared.values()))
    if total != 0:
        problems.append(f"declared divisor has degree {total}")
    return AbelVerdict(not problems, dict(orders), dict(declared), undeclared_zeros, undeclared_poles, total,
                       problems)


def he_constant_shift(triple: Union[TwistedTriple, Sequence[SingularPoint]],
                      shifts: Sequence[float],
                      volume: float,
                      rank: Optional[int] = None) -> float:
    """
    Change of the Hermite-Einstein constant when the i-th singular point is moved by t_i along
    its fiber: sum_i tr(k_i) t_i / (n Vol(X)).
    """
    if isinstance(triple, TwistedTriple):
        singularities, rank = triple.singularities, triple.rank
    else:
        singularities = list(triple)
        if rank is None:
            rank = max((len(s.weights) for s in singularities), default=1)
    if len(shifts) != len(singularities):
        raise TripleError(f"Expected one shift per singular point ({len(singularities)}). Received: {len(shifts)}")
    if volume <= 0:
        raise TripleError(f"Volume must be positive. Received: {volume}")
    total = sum(point.trace * float(t) for point, t in zip(singularities, shifts))
    return float(total / (rank * volume))
