import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import linalg, sparse

from geometry import SurfaceChartAtlas
from gauge import UnitaryConnection, degree, excision_mask
from .structure import FlowError

logger = logging.getLogger(__name__)


PATCH_POINTS = 5
SINGULAR_RATIO = 1e-2
FULL_RANK_RATIO = 1e-3
CONSTANT_TOLERANCE = 1e-6


@dataclass
class IsomorphismVerdict:
    """
    Outcome of the covariant-constant intertwiner search.

    Attributes:
        isomorphic (bool): A full-rank covariant-constant section of Hom was found.
        reason (str): Short explanation of the verdict.
        singular_ratio (float): sigma_min / sigma_max of the sampled system.
        null_dimension (int): Number of singular values below the threshold.
        witness (Optional[np.ndarray]): Intertwiner at the patch centre, n x n.
    """
    isomorphic: bool
    reason: str
    singular_ratio: float = float('nan')
    null_dimension: int = 0
    witness: Optional[np.ndarray] = None

    def to_dict(self) -> Dict:
        out = {
            'isomorphic': self.isomorphic,
            'reason': self.reason,
            'singular_ratio': self.singular_ratio,
            'null_dimension': self.null_dimension,
        }
        if self.witness is not None:
            out['witness'] = {'re': self.witness.real.tolist(), 'im': self.witness.imag.tolist()}
        return out


def _edge_difference(points: int, step: float) -> np.ndarray:
    """Second-order first derivative on a short line of points, one-sided at the ends."""
    matrix = np.zeros((points, points))
    for row in range(1, points - 1):
        matrix[row, row - 1], matrix[row, row + 1] = -0.5, 0.5
    matrix[0, :3] = [-1.5, 2.0, -0.5]
    matrix[-1, -3:] = [0.5, -2.0, 1.5]
    return matrix / step


def _fiber_difference(atlas: SurfaceChartAtlas, nt: int) -> np.ndarray:
    modes = atlas.wavenumbers(nt)
    return np.fft.ifft(1j * modes[:, None] * np.fft.fft(np.eye(nt), axis=0), axis=0)


def _patch(atlas: SurfaceChartAtlas, singularities) -> Tuple[int, slice]:
    """A PATCH_POINTS square around a chart centre that avoids every excision ball."""
    start = atlas.half_width - PATCH_POINTS // 2
    block = slice(start, start + PATCH_POINTS)
    if not singularities:
        return 0, block
    mask = excision_mask(atlas, singularities, factor=2.0)
    for chart in (0, 1):
        if not np.any(mask[chart, block, block]):
            return chart, block
    raise FlowError("No sample patch clears the excision balls.")


def _weight_multiset(conn: UnitaryConnection) -> Counter:
    return Counter(tuple(s.weights) for s in conn.singularities if any(s.weights))


def isomorphism_check(atlas: SurfaceChartAtlas,
                      conn_a: UnitaryConnection,
                      conn_b: UnitaryConnection,
                      seed: int = 0,
                      threshold: float = SINGULAR_RATIO) -> IsomorphismVerdict:
    """
    Look for a section s of Hom(E_A, E_B) with nabla s = 0 and phi_B s = s phi_A.

    On a small patch the equations v(s) + A^B_v s - s A^A_v = 0 (v = v_z, v_zbar, xi) and
    phi^B s - s phi^A = 0 are sampled into one linear system; horizontal rows are scaled by
    h and fiber rows by 2 / N_theta so every block has unit size. The pair is isomorphic when
    the system has near-null vectors and a random combination of them is invertible at
    every sampled point.

    Raises:
        FlowError: ranks or Hermite-Einstein constants differ.
    """
    if conn_a.rank != conn_b.rank:
        raise FlowError(f"Cannot compare connections of rank {conn_a.rank} and {conn_b.rank}.")
    rank = conn_a.rank
    constant_a = degree(atlas, conn_a) / (2 * rank)
    constant_b = degree(atlas, conn_b) / (2 * rank)
    if abs(constant_a - constant_b) > CONSTANT_TOLERANCE * max(1.0, abs(constant_a)):
        raise FlowError(f"Hermite-Einstein constants differ: {constant_a:.6f} and {constant_b:.6f}.")

    if _weight_multiset(conn_a) != _weight_multiset(conn_b):
        return IsomorphismVerdict(False, 'singularity weights differ')

    chart, block = _patch(atlas, list(conn_a.singularities) + list(conn_b.singularities))
    nt = atlas.n_theta
    points = PATCH_POINTS * PATCH_POINTS * nt
    square = rank * rank

    def sample(field: np.ndarray) -> np.ndarray:
        values = np.broadcast_to(field, atlas.grid_shape + (nt, rank, rank))
        return values[chart, block, block].reshape((points, rank, rank))

    difference = _edge_difference(PATCH_POINTS, atlas.h)
    identity = np.eye(PATCH_POINTS)
    fiber = _fiber_difference(atlas, nt)
    d_x = np.kron(np.kron(difference, identity), np.eye(nt))
    d_y = np.kron(np.kron(identity, difference), np.eye(nt))
    d_theta = np.kron(np.eye(PATCH_POINTS * PATCH_POINTS), fiber)
    potential = np.repeat(atlas.gauge_potential[chart, block, block].ravel(), nt)[:, None]
    derivatives = {
        'v_z': 0.5 * (d_x - 1j * d_y) - potential * d_theta,
        'v_zbar': 0.5 * (d_x + 1j * d_y) - np.conj(potential) * d_theta,
        'xi': d_theta,
    }
    scales = {'v_z': atlas.h, 'v_zbar': atlas.h, 'xi': 2.0 / nt}

    def multiply(left: np.ndarray, right: np.ndarray) -> sparse.spmatrix:
        blocks = [np.kron(left[p], np.eye(rank)) - np.kron(np.eye(rank), right[p].T) for p in range(points)]
        return sparse.block_diag(blocks, format='csr')

    rows = []
    for direction, operator in derivatives.items():
        coupling = multiply(sample(conn_b.component(direction)), sample(conn_a.component(direction)))
        rows.append(scales[direction] * (np.kron(operator, np.eye(square)) + coupling.toarray()))
    rows.append(multiply(sample(conn_b.higgs), sample(conn_a.higgs)).toarray())
    system = np.vstack(rows)

    # the system is tall, so the reduced right singular vectors span the whole domain
    _, singular, vh = linalg.svd(system, full_matrices=False)
    ratio = float(singular[-1] / singular[0])
    null = singular < threshold * singular[0]
    vectors = vh.conj().T
    logger.debug("Isomorphism system %s: sigma ratio %.3e, %d near-null", system.shape, ratio, int(null.sum()))
    if not np.any(null):
        return IsomorphismVerdict(False, 'no covariant-constant section', ratio, 0)

    rng = np.random.default_rng(seed)
    weights = rng.standard_normal(int(null.sum())) + 1j * rng.standard_normal(int(null.sum()))
    section = (vectors[:, null] @ weights).reshape((points, rank, rank))
    values = np.linalg.svd(section, compute_uv=False)
    conditioning = float(np.min(values[:, -1]) / np.max(values[:, 0]))
    centre = section[(PATCH_POINTS * PATCH_POINTS // 2) * nt]
    if conditioning < FULL_RANK_RATIO:
        return IsomorphismVerdict(False, 'covariant-constant sections are degenerate', ratio, int(null.sum()), centre)
    return IsomorphismVerdict(True, 'full-rank covariant-constant section', ratio, int(null.sum()),
                              centre / np.max(np.abs(centre)))
