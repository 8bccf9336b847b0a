import itertools
import logging
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import sympy
from sympy import I, Poly, QQ_I, Rational, Symbol

logger = logging.getLogger(__name__)


Z = Symbol('z')
INFINITY = 'inf'

Point = Union[complex, str, sympy.Expr]


class TripleError(ValueError):
    """Raised for malformed rational data, triples and cocycles."""


def gaussian(value) -> sympy.Expr:
    """An exact Gaussian rational from an int, a string, a Fraction, a float, a complex, a [re, im] pair or a SymPy number."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise TripleError(f"A Gaussian rational pair needs two parts. Received: {value}")
        return gaussian(value[0]) + I * gaussian(value[1])
    if isinstance(value, complex):
        return gaussian(value.real) + I * gaussian(value.imag)
    if isinstance(value, float):
        return Rational(repr(value))
    if isinstance(value, Fraction):
        return Rational(value.numerator, value.denominator)
    if isinstance(value, (int, str)):
        return Rational(value)
    expr = sympy.sympify(value)
    real, imag = expr.as_real_imag()
    if not (real.is_Rational and imag.is_Rational):
        raise TripleError(f"{value} is not a Gaussian rational.")
    return real + I * imag


def gaussian_parts(value: sympy.Expr) -> Tuple[str, str]:
    real, imag = sympy.sympify(value).as_real_imag()
    return str(Rational(real)), str(Rational(imag))


def _reciprocal(value: sympy.Expr) -> sympy.Expr:
    real, imag = sympy.sympify(value).as_real_imag()
    norm = real ** 2 + imag ** 2
    if norm == 0:
        raise TripleError("Division by zero.")
    return real / norm - I * imag / norm


def _poly(expr) -> Poly:
    return Poly(expr, Z, domain=QQ_I)


def _is_infinity(point: Point) -> bool:
    return isinstance(point, str) and point == INFINITY


class RationalFunction:
    """
    A rational function of z over the Gaussian rationals, kept in canonical form:
    numerator and denominator coprime, denominator monic.

    Attributes:
        numerator (Poly): Numerator over QQ_I.
        denominator (Poly): Monic denominator over QQ_I.
    """

    def __init__(self, numerator=0, denominator=1) -> None:
        numerator = numerator if isinstance(numerator, Poly) else _poly(sympy.sympify(numerator))
        denominator = denominator if isinstance(denominator, Poly) else _poly(sympy.sympify(denominator))
        if denominator.is_zero:
            raise TripleError("Rational function has a zero denominator.")
        if numerator.is_zero:
            self.numerator, self.denominator = _poly(0), _poly(1)
            return
        common = numerator.gcd(denominator)
        numerator, _ = numerator.div(common)
        denominator, _ = denominator.div(common)
        scale = _poly(_reciprocal(denominator.LC()))
        self.numerator = numerator * scale
        self.denominator = denominator * scale

    @classmethod
    def from_expr(cls, expr) -> "RationalFunction":
        numerator, denominator = sympy.fraction(sympy.together(sympy.sympify(expr)))
        return cls(numerator, denominator)

    @classmethod
    def constant(cls, value) -> "RationalFunction":
        return cls(gaussian(value))

    @classmethod
    def linear(cls, root) -> "RationalFunction":
        """z - root."""
        return cls(Z - gaussian(root))

    @classmethod
    def coerce(cls, value) -> "RationalFunction":
        if isinstance(value, RationalFunction):
            return value
        if isinstance(value, str):
            return cls.from_dict(value)
        if isinstance(value, sympy.Expr) and value.free_symbols:
            return cls.from_expr(value)
        return cls.constant(value)

    def __repr__(self) -> str:
        return f"RationalFunction({self.to_expr()})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalFunction):
            try:
                other = RationalFunction.coerce(other)
            except (TripleError, TypeError, sympy.SympifyError):
                return NotImplemented
        return self.numerator == other.numerator and self.denominator == other.denominator

    def __hash__(self) -> int:
        return hash((tuple(self.numerator.all_coeffs()), tuple(self.denominator.all_coeffs())))

    def __add__(self, other) -> "RationalFunction":
        other = RationalFunction.coerce(other)
        return RationalFunction(self.numerator * other.denominator + other.numerator * self.denominator,
                                self.denominator * other.denominator)

    __radd__ = __add__

    def __neg__(self) -> "RationalFunction":
        return RationalFunction(-self.numerator, self.denominator)

    def __sub__(self, other) -> "RationalFunction":
        return self + (-RationalFunction.coerce(other))

    def __rsub__(self, other) -> "RationalFunction":
        return RationalFunction.coerce(other) - self

    def __mul__(self, other) -> "RationalFunction":
        other = RationalFunction.coerce(other)
        return RationalFunction(self.numerator * other.numerator, self.denominator * other.denominator)

    __rmul__ = __mul__

    def inverse(self) -> "RationalFunction":
        if self.is_zero:
            raise TripleError("The zero function has no inverse.")
        return RationalFunction(self.denominator, self.numerator)

    def __truediv__(self, other) -> "RationalFunction":
        return self * RationalFunction.coerce(other).inverse()

    def __rtruediv__(self, other) -> "RationalFunction":
        return RationalFunction.coerce(other) * self.inverse()

    def __pow__(self, exponent: int) -> "RationalFunction":
        if not isinstance(exponent, (int, np.integer)):
            raise TripleError(f"Rational functions take integer powers only. Received: {exponent}")
        base = self if exponent >= 0 else self.inverse()
        return RationalFunction(base.numerator ** abs(int(exponent)), base.denominator ** abs(int(exponent)))

    @property
    def is_zero(self) -> bool:
        return self.numerator.is_zero

    @property
    def degree(self) -> int:
        """deg(numerator) - deg(denominator); the order at infinity is its negative."""
        return self.numerator.degree() - self.denominator.degree()

    def order_at(self, point: Point) -> int:
        """Order of vanishing at a Gaussian-rational point or at 'inf'; poles count negatively."""
        if self.is_zero:
            raise TripleError("The zero function has no order.")
        if _is_infinity(point):
            return -self.degree
        factor = _poly(Z - gaussian(point))

        def multiplicity(poly: Poly) -> int:
            count = 0
            while poly.degree() > 0:
                quotient, remainder = poly.div(factor)
                if not remainder.is_zero:
                    break
                poly, count = quotient, count + 1
            return count

        return multiplicity(self.numerator) - multiplicity(self.denominator)

    def to_expr(self) -> sympy.Expr:
        return self.numerator.as_expr() / self.denominator.as_expr()

    @cached_property
    def _coefficients(self) -> Tuple[np.ndarray, np.ndarray]:
        def numeric(poly: Poly) -> np.ndarray:
            return np.array([complex(c) for c in poly.all_coeffs()], dtype=complex)
        return numeric(self.numerator), numeric(self.denominator)

    def __call__(self, z) -> np.ndarray:
        numerator, denominator = self._coefficients
        z = np.asarray(z, dtype=complex)
        return np.polyval(numerator, z) / np.polyval(denominator, z)

    def zeros(self) -> np.ndarray:
        numerator, _ = self._coefficients
        return np.roots(numerator) if numerator.size > 1 else np.array([], dtype=complex)

    def poles(self) -> np.ndarray:
        _, denominator = self._coefficients
        return np.roots(denominator) if denominator.size > 1 else np.array([], dtype=complex)

    def leading_ratio(self) -> complex:
        numerator, denominator = self._coefficients
        return complex(numerator[0] / denominator[0])

    def to_dict(self) -> Dict:
        """Coefficients, highest degree first, as exact [re, im] string pairs."""
        return {
            'numerator': [list(gaussian_parts(c)) for c in self.numerator.all_coeffs()],
            'denominator': [list(gaussian_parts(c)) for c in self.denominator.all_coeffs()],
        }

    @classmethod
    def from_dict(cls, data) -> "RationalFunction":
        if isinstance(data, (str, int)):
            return cls.from_expr(sympy.sympify(data, locals={'z': Z}))
        try:
            numerator = sum(gaussian(c) * Z ** power for power, c in enumerate(reversed(data['numerator'])))
            denominator = sum(gaussian(c) * Z ** power
                              for power, c in enumerate(reversed(data.get('denominator', [[1, 0]]))))
        except (KeyError, TypeError) as error:
            raise TripleError(f"Malformed rational function document: {error}") from error
        return cls(numerator, denominator)


Entry = Union[RationalFunction, int, str, sympy.Expr]


class RationalMatrix:
    """
    A square matrix of rational functions.

    Attributes:
        entries (Tuple[Tuple[RationalFunction, ...], ...]): Rows of entries.
    """

    def __init__(self, rows: Sequence[Sequence[Entry]]) -> None:
        entries = tuple(tuple(RationalFunction.coerce(e) for e in row) for row in rows)
        if not entries or any(len(row) != len(entries) for row in entries):
            raise TripleError("Rational matrices must be square and non-empty.")
        self.entries = entries

    @classmethod
    def identity(cls, size: int) -> "RationalMatrix":
        return cls([[1 if i == j else 0 for j in range(size)] for i in range(size)])

    @classmethod
    def diagonal(cls, values: Sequence[Entry]) -> "RationalMatrix":
        size = len(values)
        return cls([[values[i] if i == j else 0 for j in range(size)] for i in range(size)])

    @classmethod
    def scalar(cls, value: Entry, size: int = 1) -> "RationalMatrix":
        return cls.diagonal([value] * size)

    @classmethod
    def coerce(cls, value) -> "RationalMatrix":
        if isinstance(value, RationalMatrix):
            return value
        if isinstance(value, (list, tuple)):
            return cls(value)
        return cls.scalar(value)

    @property
    def size(self) -> int:
        return len(self.entries)

    def __getitem__(self, index: Tuple[int, int]) -> RationalFunction:
        row, column = index
        return self.entries[row][column]

    def __repr__(self) -> str:
        return f"RationalMatrix({[[str(e.to_expr()) for e in row] for row in self.entries]})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        return self.entries == other.entries

    def __hash__(self) -> int:
        return hash(self.entries)

    def _check(self, other: "RationalMatrix") -> None:
        if other.size != self.size:
            raise TripleError(f"Matrix sizes {self.size} and {other.size} do not match.")

    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        other = RationalMatrix.coerce(other)
        self._check(other)
        n = self.size
        return RationalMatrix([[sum((self[i, k] * other[k, j] for k in range(n)), RationalFunction())
                                for j in range(n)] for i in range(n)])

    def __add__(self, other: "RationalMatrix") -> "RationalMatrix":
        self._check(other)
        return RationalMatrix([[a + b for a, b in zip(row_a, row_b)]
                               for row_a, row_b in zip(self.entries, other.entries)])

    def scale(self, factor: Entry) -> "RationalMatrix":
        factor = RationalFunction.coerce(factor)
        return RationalMatrix([[factor * e for e in row] for row in self.entries])

    def submatrix(self, rows: Sequence[int], columns: Sequence[int]) -> "RationalMatrix":
        return RationalMatrix([[self[i, j] for j in columns] for i in rows])

    def det(self) -> RationalFunction:
        """Cofactor expansion along the first row; sizes stay small here."""
        n = self.size
        if n == 1:
            return self[0, 0]
        total = RationalFunction()
        for column in range(n):
            if self[0, column].is_zero:
                continue
            minor = self.submatrix(range(1, n), [j for j in range(n) if j != column])
            term = self[0, column] * minor.det()
            total = total + term if column % 2 == 0 else total - term
        return total

    def minors(self, order: int) -> List[RationalFunction]:
        n = self.size
        if order == n:
            return [self.det()]
        return [self.submatrix(rows, columns).det()
                for rows in itertools.combinations(range(n), order)
                for columns in itertools.combinations(range(n), order)]

    def adjugate(self) -> "RationalMatrix":
        n = self.size
        if n == 1:
            return RationalMatrix([[1]])
        cofactors = [[(1 if (i + j) % 2 == 0 else -1) *
                      self.submatrix([r for r in range(n) if r != i], [c for c in range(n) if c != j]).det()
                      for j in range(n)] for i in range(n)]
        return RationalMatrix([[cofactors[j][i] for j in range(n)] for i in range(n)])

    def inverse(self) -> "RationalMatrix":
        determinant = self.det()
        if determinant.is_zero:
            raise TripleError("Matrix is singular as a rational matrix.")
        return self.adjugate().scale(determinant.inverse())

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape + (self.size, self.size), dtype=complex)
        for i, row in enumerate(self.entries):
            for j, entry in enumerate(row):
                out[..., i, j] = entry(z)
        return out

    def to_sympy(self) -> sympy.Matrix:
        return sympy.Matrix([[e.to_expr() for e in row] for row in self.entries])

    def to_dict(self) -> Dict:
        return {'rows': [[e.to_dict() for e in row] for row in self.entries]}

    @classmethod
    def from_dict(cls, data) -> "RationalMatrix":
        rows = data['rows'] if isinstance(data, dict) else data
        return cls([[RationalFunction.from_dict(e) for e in row] for row in rows])


def block_diagonal(blocks: Sequence[RationalMatrix]) -> RationalMatrix:
    total = sum(b.size for b in blocks)
    rows: List[List[Entry]] = [[0] * total for _ in range(total)]
    offset = 0
    for block in blocks:
        for i in range(block.size):
            for j in range(block.size):
                rows[offset + i][offset + j] = block[i, j]
        offset += block.size
    return RationalMatrix(rows)


def pole_type(rho, point: Point) -> Tuple[int, ...]:
    """
    Local type of a meromorphic matrix at a point: the exponents of its Smith form over the
    local ring, sorted nonincreasing. The sum of the j smallest exponents is the least order
    at the point among the j x j minors.

    Raises:
        TripleError: the determinant vanishes identically.
    """
    rho = RationalMatrix.coerce(rho)
    if rho.det().is_zero:
        raise TripleError("Pole type needs a matrix with nonzero determinant.")
    cumulative = [0]
    for order in range(1, rho.size + 1):
        orders = [minor.order_at(point) for minor in rho.minors(order) if not minor.is_zero]
        cumulative.append(min(orders))
    exponents = [cumulative[j] - cumulative[j - 1] for j in range(1, rho.size + 1)]
    return tuple(sorted(exponents, reverse=True))
