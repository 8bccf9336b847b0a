import itertools
import logging
from typing import Dict, List, Tuple

import numpy as np

from .cover import CoverCombinatorics
from .rational import RationalFunction, TripleError, gaussian

logger = logging.getLogger(__name__)


class LineCocycle:
    """
    Transition functions T[(a, b)] : E_b -> E_a of a line bundle on the base, one per ordered
    overlap of the cover, satisfying the untwisted cocycle identity
    T[a, b] T[b, c] = T[a, c] and T[a, b] T[b, a] = 1.

    Attributes:
        cover (CoverCombinatorics): The cover the transitions live on.
        transitions (Dict[Tuple[int, int], RationalFunction]): Exact transition functions.
    """

    def __init__(self, cover: CoverCombinatorics, transitions: Dict[Tuple[int, int], RationalFunction]) -> None:
        missing = [pair for pair in cover.overlap_pairs if pair not in transitions]
        if missing:
            raise TripleError(f"Line cocycle is missing transitions for overlaps {missing}.")
        self.cover = cover
        self.transitions = {pair: RationalFunction.coerce(value) for pair, value in transitions.items()}

    def __getitem__(self, pair: Tuple[int, int]) -> RationalFunction:
        return self.transitions[pair]

    def __eq__(self, other) -> bool:
        if not isinstance(other, LineCocycle):
            return NotImplemented
        return self.transitions == other.transitions

    @classmethod
    def trivial(cls, cover: CoverCombinatorics) -> "LineCocycle":
        return cls(cover, {pair: RationalFunction.constant(1) for pair in cover.overlap_pairs})

    @classmethod
    def degree(cls, cover: CoverCombinatorics, degree: int) -> "LineCocycle":
        """O(d): T[0, s] = (z - b)^d from every sector to the outer patch."""
        local = RationalFunction.linear(gaussian(cover.base_point)) ** int(degree)
        transitions = {}
        for a, b in cover.overlap_pairs:
            if a == 0:
                transitions[(a, b)] = local
            elif b == 0:
                transitions[(a, b)] = local.inverse()
            else:
                transitions[(a, b)] = RationalFunction.constant(1)
        return cls(cover, transitions)

    @classmethod
    def coboundary(cls, cover: CoverCombinatorics, functions: Dict[int, RationalFunction]) -> "LineCocycle":
        """T[a, b] = f_a / f_b for nowhere-vanishing local functions f."""
        functions = {label: RationalFunction.coerce(f) for label, f in functions.items()}
        return cls(cover, {(a, b): functions[a] / functions[b] for a, b in cover.overlap_pairs})

    def compose(self, other: "LineCocycle") -> "LineCocycle":
        """Tensor product of line bundles."""
        return LineCocycle(self.cover, {pair: self[pair] * other[pair] for pair in self.cover.overlap_pairs})

    def inverse(self) -> "LineCocycle":
        return LineCocycle(self.cover, {pair: self[pair].inverse() for pair in self.cover.overlap_pairs})

    def validate(self) -> List[str]:
        """Names of the violated cocycle identities; empty when valid."""
        violations = []
        for a, b in self.cover.overlap_pairs:
            if self[(a, b)].is_zero:
                violations.append(f"T[{a},{b}] vanishes identically")
            elif self[(a, b)] * self[(b, a)] != RationalFunction.constant(1):
                violations.append(f"T[{a},{b}] T[{b},{a}] = 1")
        for component in self.cover.components:
            for first, middle, last in itertools.permutations(component.labels):
                if self[(first, middle)] * self[(middle, last)] != self[(first, last)]:
                    violations.append(f"T[{first},{middle}] T[{middle},{last}] = T[{first},{last}]")
        return sorted(set(violations))

    @property
    def is_valid(self) -> bool:
        return not self.validate()

    def evaluate(self, target: int, source: int, z) -> np.ndarray:
        return self[(target, source)](z)

    def to_dict(self) -> Dict:
        return {
            'k': self.cover.bundle_degree,
            'base_point': [self.cover.base_point.real, self.cover.base_point.imag],
            'transitions': {f"{a},{b}": value.to_dict() for (a, b), value in sorted(self.transitions.items())},
        }

    @classmethod
    def from_dict(cls, data: Dict, cover: CoverCombinatorics = None) -> "LineCocycle":
        if cover is None:
            base = data.get('base_point', [0, 0])
            cover = CoverCombinatorics(int(data['k']), complex(base[0], base[1]))
        if 'degree' in data:
            return cls.degree(cover, int(data['degree']))
        transitions = {}
        for key, value in data['transitions'].items():
            a, b = (int(part) for part in key.split(','))
            transitions[(a, b)] = RationalFunction.from_dict(value)
        return cls(cover, transitions)
