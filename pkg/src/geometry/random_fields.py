import logging
from itertools import product
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .atlas import SurfaceChartAtlas, GeometryError

logger = logging.getLogger(__name__)


Monomial = Tuple[int, int, int, int]    # exponents of u1, u2, conj(u1), conj(u2)


def admissible_monomials(bundle_degree: int, max_degree: int, fiber_invariant: bool = False) -> List[Monomial]:
    """
    Monomials u^a conj(u)^b on S^3 that descend to X = S^3 / Z_k, i.e. |a| - |b| divisible by k.
    Their fiber wavenumber is (|a| - |b|) / k.
    """
    monomials = []
    for a1, a2, b1, b2 in product(range(max_degree + 1), repeat=4):
        if a1 + a2 + b1 + b2 > max_degree:
            continue
        charge = a1 + a2 - b1 - b2
        if charge % bundle_degree:
            continue
        if fiber_invariant and charge:
            continue
        monomials.append((a1, a2, b1, b2))
    return monomials


def sphere_coordinates(atlas: SurfaceChartAtlas) -> Tuple[np.ndarray, np.ndarray]:
    """
    Fiber-free parts of (u1, u2) in each chart: (z, 1) / sqrt(1 + |z|^2) on chart 0 and
    (1, w) / sqrt(1 + |w|^2) on chart 1. The full point is exp(i theta / k) times these.
    """
    scale = 1.0 / np.sqrt(1 + atlas.radius ** 2)
    ones = np.ones_like(atlas.coordinate)
    first = np.stack([atlas.coordinate[0], ones[1]]) * scale
    second = np.stack([ones[0], atlas.coordinate[1]]) * scale
    return first, second


def evaluate_monomial(atlas: SurfaceChartAtlas, monomial: Monomial, nt: int) -> np.ndarray:
    """Values of one admissible monomial on the atlas, shape (2, nx, nx, nt)."""
    a1, a2, b1, b2 = monomial
    first, second = sphere_coordinates(atlas)
    spatial = first ** a1 * second ** a2 * np.conj(first) ** b1 * np.conj(second) ** b2
    mode = (a1 + a2 - b1 - b2) // atlas.bundle_degree
    theta = 2 * np.pi * np.arange(nt) / nt
    return spatial[:, :, :, None] * np.exp(1j * mode * theta)[None, None, None, :]


class FieldGenerator:
    """
    Generates random smooth global fields on an atlas.

    Every field is a random combination of admissible monomials in the S^3 coordinates,
    evaluated analytically in both charts, so chart values agree exactly on the overlap
    and the fringe carries true values.

    Attributes:
        atlas (SurfaceChartAtlas): Atlas to sample on.
        max_degree (int): Largest total monomial degree.
        rng (np.random.Generator): Seeded generator for the coefficients.
        kind_lookup (Dict[str, Callable]): Mapping of field kinds to generation methods.
    """

    def __init__(self, atlas: SurfaceChartAtlas, seed: int = 0, max_degree: int = 3) -> None:
        # the fiber mode max_degree // k must sit strictly below Nyquist
        if 2 * (max_degree // atlas.bundle_degree) >= atlas.n_theta:
            raise GeometryError(
                f"max_degree {max_degree} needs fiber mode {max_degree // atlas.bundle_degree}, "
                f"which n_theta={atlas.n_theta} does not resolve."
            )
        self.atlas = atlas
        self.max_degree = max_degree
        self.rng = np.random.default_rng(seed)

        # Add new field kinds and their generation methods here
        self.kind_lookup: Dict[str, Callable] = {
            'scalar': self._generate_scalar,
            'real': self._generate_real,
            'matrix': self._generate_matrix,
            'hermitian': self._generate_hermitian,
            'anti_hermitian': self._generate_anti_hermitian,
            'section': self._generate_section,
        }

    def generate(self, kind: str, rank: int = 1, fiber_invariant: bool = False) -> np.ndarray:
        """
        Draw one random field.

        Args:
            kind (str): One of the keys of `kind_lookup`.
            rank (int): Matrix size n.
            fiber_invariant (bool): Restrict to theta-independent monomials and return nt = 1.

        Returns:
            np.ndarray: Field of shape (2, nx, nx, nt, n, n), or (..., n, 1) for sections.
        """
        if kind not in self.kind_lookup:
            raise GeometryError(f"Field kind '{kind}' is not supported.")
        return self.kind_lookup[kind](rank, fiber_invariant)

    def random_function(self, fiber_invariant: bool = False) -> np.ndarray:
        """One random complex global function, shape (2, nx, nx, nt), zero off the active set."""
        nt = 1 if fiber_invariant else self.atlas.n_theta
        monomials = admissible_monomials(self.atlas.bundle_degree, self.max_degree, fiber_invariant)
        coefficients = (self.rng.standard_normal(len(monomials))
                        + 1j * self.rng.standard_normal(len(monomials))) / np.sqrt(len(monomials))
        values = np.zeros(self.atlas.grid_shape + (nt,), dtype=complex)
        for coefficient, monomial in zip(coefficients, monomials):
            values += coefficient * evaluate_monomial(self.atlas, monomial, nt)
        values[~self.atlas.active] = 0
        return values

    def _matrix_entries(self, rows: int, columns: int, fiber_invariant: bool) -> np.ndarray:
        entries = [[self.random_function(fiber_invariant) for _ in range(columns)] for _ in range(rows)]
        return np.stack([np.stack(row, axis=-1) for row in entries], axis=-2)

    def _generate_scalar(self, rank: int, fiber_invariant: bool) -> np.ndarray:
        return self.random_function(fiber_invariant)[..., None, None]

    def _generate_real(self, rank: int, fiber_invariant: bool) -> np.ndarray:
        return self.random_function(fiber_invariant).real[..., None, None].astype(complex)

    def _generate_matrix(self, rank: int, fiber_invariant: bool) -> np.ndarray:
        return self._matrix_entries(rank, rank, fiber_invariant)

    def _generate_hermitian(self, rank: int, fiber_invariant: bool) -> np.ndarray:
        matrix = self._matrix_entries(rank, rank, fiber_invariant)
        return 0.5 * (matrix + np.conj(np.swapaxes(matrix, -1, -2)))

    def _generate_anti_hermitian(self, rank: int, fiber_invariant: bool) -> np.ndarray:
        matrix = self._matrix_entries(rank, rank, fiber_invariant)
        return 0.5 * (matrix - np.conj(np.swapaxes(matrix, -1, -2)))

    def _generate_section(self, rank: int, fiber_invariant: bool) -> np.ndarray:
        return self._matrix_entries(rank, 1, fiber_invariant)
