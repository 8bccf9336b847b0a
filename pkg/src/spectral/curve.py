import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Dict, List, Optional

import numpy as np
import sympy
from sympy import Poly, QQ_I, Symbol

from triples import RationalFunction, RationalMatrix, Z

logger = logging.getLogger(__name__)


ETA = Symbol('eta')


class SpectralError(ValueError):
    """Raised when spectral data cannot be computed, usually near a branch point."""


@dataclass
class SpectralCurveData:
    """
    The spectral curve det(G(z) - eta I) = sum_j a_j(z) eta^j of a monodromy matrix.

    Attributes:
        coefficients (List[RationalFunction]): a_0, ..., a_n; a_n = (-1)^n.
        discriminant (RationalFunction): Resultant of P and dP/deta after clearing denominators.
        squarefree (Optional[bool]): P has no repeated factor over C(z).
        irreducible (Optional[bool]): The sheets form one monodromy orbit.
        certificate (Optional[object]): Monodromy permutations behind the irreducibility flag.
    """
    coefficients: List[RationalFunction]
    discriminant: RationalFunction
    squarefree: Optional[bool] = None
    irreducible: Optional[bool] = None
    certificate: Optional[object] = field(default=None, repr=False)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def polynomial(self) -> sympy.Expr:
        """P(z, eta) with rational-function coefficients."""
        return sum(a.to_expr() * ETA ** j for j, a in enumerate(self.coefficients))

    def cleared(self) -> sympy.Expr:
        """D(z) P(z, eta) with D the monic lcm of the coefficient denominators."""
        common = reduce(lambda left, right: left.lcm(right), (a.denominator for a in self.coefficients))
        terms = []
        for j, a in enumerate(self.coefficients):
            factor, remainder = common.div(a.denominator)
            if not remainder.is_zero:
                raise SpectralError("Coefficient denominators do not divide their lcm.")
            terms.append((a.numerator * factor).as_expr() * ETA ** j)
        return sympy.expand(sum(terms))

    def numeric_coefficients(self, z) -> np.ndarray:
        """Coefficients at the points z, highest power of eta first, shape z.shape + (n + 1,)."""
        z = np.asarray(z, dtype=complex)
        return np.stack([a(z) for a in reversed(self.coefficients)], axis=-1)

    def roots(self, z: complex) -> np.ndarray:
        return np.roots(self.numeric_coefficients(complex(z)))

    def to_dict(self) -> Dict:
        out = {
            'coefficients': [a.to_dict() for a in self.coefficients],
            'polynomial': str(self.polynomial),
            'discriminant': str(self.discriminant.to_expr()),
            'squarefree': self.squarefree,
            'irreducible': self.irreducible,
        }
        if self.certificate is not None:
            out['certificate'] = self.certificate.to_dict()
        return out


def _trace(matrix: RationalMatrix) -> RationalFunction:
    return reduce(lambda left, right: left + right, (matrix[i, i] for i in range(matrix.size)))


def char_poly(monodromy) -> SpectralCurveData:
    """
    Exact coefficients of det(G - eta I) by the Faddeev-LeVerrier recursion, which only needs
    products and traces of rational matrices.
    """
    matrix = RationalMatrix.coerce(monodromy)
    size = matrix.size
    # monic[j] is the coefficient of eta^j in det(eta I - G)
    monic = [RationalFunction.constant(0)] * size + [RationalFunction.constant(1)]
    auxiliary = RationalMatrix.scalar(0, size)
    for step in range(1, size + 1):
        auxiliary = matrix @ auxiliary + RationalMatrix.scalar(monic[size - step + 1], size)
        monic[size - step] = _trace(matrix @ auxiliary) * RationalFunction.constant(Fraction(-1, step))
    sign = RationalFunction.constant((-1) ** size)
    coefficients = [c * sign for c in monic]
    data = SpectralCurveData(coefficients, RationalFunction.constant(0))
    data.discriminant = discriminant(data)
    return data


def discriminant(curve: SpectralCurveData) -> RationalFunction:
    if curve.degree < 1:
        return RationalFunction.constant(1)
    cleared = curve.cleared()
    result = sympy.resultant(cleared, sympy.diff(cleared, ETA), ETA, domain=QQ_I[Z])
    return RationalFunction.from_expr(result)


def squarefree_check(curve: SpectralCurveData) -> bool:
    """gcd(P, dP/deta) over C(z)[eta] is constant exactly when P is reduced with distinct generic sheets."""
    if curve.degree < 2:
        curve.squarefree = True
        return True
    cleared = curve.cleared()
    common = sympy.gcd(cleared, sympy.diff(cleared, ETA), ETA, domain=QQ_I[Z])
    squarefree = sympy.degree(common, ETA) == 0
    if squarefree == curve.discriminant.is_zero:
        raise SpectralError("gcd and discriminant disagree on the squarefree test.")
    curve.squarefree = bool(squarefree)
    return curve.squarefree


def branch_points(curve: SpectralCurveData) -> np.ndarray:
    """Zeros of the squarefree part of the discriminant together with poles of the coefficients."""
    if curve.discriminant.is_zero:
        raise SpectralError("The spectral curve is not reduced; every point is a branch point.")
    polynomials = [curve.discriminant.numerator] + [a.denominator for a in curve.coefficients]
    points: List[complex] = []
    for polynomial in polynomials:
        reduced = Poly(polynomial.as_expr(), Z, domain=QQ_I).sqf_part()
        if reduced.degree() < 1:
            continue
        coefficients = np.array([complex(c) for c in reduced.all_coeffs()], dtype=complex)
        for root in np.roots(coefficients):
            if not any(abs(root - known) < 1e-9 * max(1.0, abs(root)) for known in points):
                points.append(complex(root))
    return np.array(sorted(points, key=lambda p: (round(p.real, 12), round(p.imag, 12))), dtype=complex)
