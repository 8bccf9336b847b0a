import logging
from typing import NamedTuple

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from .atlas import SurfaceChartAtlas, GeometryError, resolve_weight

logger = logging.getLogger(__name__)


class ModeOperator(NamedTuple):
    """Scalar Laplacian on one fiber Fourier mode, restricted to interior unknowns."""
    wavenumber: float
    interior: np.ndarray          # flat indices of interior points in a (2, nx, nx) array
    embed: sparse.csr_matrix      # interior values -> full grid with synchronized fringe
    operator: sparse.csr_matrix   # Delta on interior unknowns


def _centred_difference(atlas: SurfaceChartAtlas, axis: int) -> sparse.csr_matrix:
    nx = atlas.nx
    step = sparse.diags([-np.ones(nx - 1), np.ones(nx - 1)], [-1, 1], shape=(nx, nx)) / (2 * atlas.h)
    identity = sparse.identity(nx)
    per_chart = sparse.kron(step, identity) if axis == 1 else sparse.kron(identity, step)
    return sparse.kron(sparse.identity(2), per_chart, format='csr')


def _fiber_phase(atlas: SurfaceChartAtlas, index: int, nt: int) -> np.ndarray:
    shift = atlas.fringe_transfer.shift
    if nt == 1:
        return np.ones_like(shift, dtype=complex)
    if nt % 2 == 0 and index == nt // 2:
        return np.cos(shift * nt / 2).astype(complex)
    return np.exp(1j * np.fft.fftfreq(nt, 1.0 / nt)[index] * shift)


def synchronization_matrix(atlas: SurfaceChartAtlas, kind, index: int = 0, nt: int = 1) -> sparse.csr_matrix:
    """Matrix form of SurfaceChartAtlas.synchronize acting on fiber mode `index` of `nt`."""
    p, q = resolve_weight(kind)
    transfer = atlas.fringe_transfer
    size = 2 * atlas.nx * atlas.nx
    factor = transfer.derivative ** p * np.conj(transfer.derivative) ** q
    factor = factor * _fiber_phase(atlas, index, nt)
    select = sparse.csr_matrix(
        (np.ones(transfer.targets.size), (transfer.targets, np.arange(transfer.targets.size))),
        shape=(size, transfer.targets.size),
    )
    keep = sparse.diags(atlas.interior.reshape(-1).astype(float))
    return (keep + select @ sparse.diags(factor) @ transfer.matrix).tocsr()


def mode_laplacian(atlas: SurfaceChartAtlas, index: int = 0, nt: int = 1) -> ModeOperator:
    """
    Assemble the scalar Laplacian of `laplacian` on fiber mode `index` of an nt-point fiber.

    Fiber-invariant coefficients decouple the Fourier modes, so each mode is a sparse
    operator on the interior points of both charts; fringe values are expressed through
    the interpolation that synchronize uses.
    """
    wavenumber = atlas.wavenumbers(nt)[index] if nt > 1 else 0.0
    d_x = _centred_difference(atlas, 1)
    d_y = _centred_difference(atlas, 2)
    potential = atlas.gauge_potential.reshape(-1)
    v_z = 0.5 * (d_x - 1j * d_y) - 1j * wavenumber * sparse.diags(potential)
    v_zbar = 0.5 * (d_x + 1j * d_y) - 1j * wavenumber * sparse.diags(np.conj(potential))

    sync_function = synchronization_matrix(atlas, 'function', index, nt)
    sync_z = synchronization_matrix(atlas, 'z', index, nt)
    sync_zbar = synchronization_matrix(atlas, 'zbar', index, nt)

    inverse_mu = sparse.diags(1.0 / atlas.density_mu.reshape(-1))
    horizontal = inverse_mu @ (v_zbar @ sync_z @ v_z + v_z @ sync_zbar @ v_zbar)
    size = 2 * atlas.nx * atlas.nx
    full = sync_function @ (-0.5 * wavenumber ** 2 * sparse.identity(size) + horizontal)

    interior = np.flatnonzero(atlas.interior.reshape(-1))
    restrict = sparse.csr_matrix(
        (np.ones(interior.size), (np.arange(interior.size), interior)),
        shape=(interior.size, size),
    )
    embed = (sync_function @ restrict.T).tocsr()
    operator = (restrict @ full @ embed).tocsr()
    return ModeOperator(wavenumber, interior, embed, operator)


class ResolventSolver:
    """
    Applies (I - s Delta)^-1 to fields, mode by mode, with cached sparse LU factors.

    Attributes:
        atlas (SurfaceChartAtlas): Atlas the fields live on.
        scale (float): The factor s.
    """

    def __init__(self, atlas: SurfaceChartAtlas, scale: float) -> None:
        if scale < 0:
            raise GeometryError(f"Resolvent scale must be nonnegative. Received: {scale}")
        self.atlas = atlas
        self.scale = scale
        self._factors = {}

    def _factor(self, index: int, nt: int):
        key = (index, nt)
        if key not in self._factors:
            mode = mode_laplacian(self.atlas, index, nt)
            matrix = sparse.identity(mode.interior.size, format='csc') - self.scale * mode.operator.tocsc()
            self._factors[key] = (mode, sparse_linalg.splu(matrix.tocsc()))
            logger.debug("Factorized resolvent for mode %d of %d (scale %.3g)", index, nt, self.scale)
        return self._factors[key]

    def apply(self, field: np.ndarray) -> np.ndarray:
        field = self.atlas.check_field(field)
        nt = field.shape[3]
        spectrum = np.fft.fft(field, axis=3)
        out = np.zeros_like(spectrum, dtype=complex)
        flat_shape = (2 * self.atlas.nx * self.atlas.nx, -1)
        for index in range(nt):
            mode, factor = self._factor(index, nt)
            values = spectrum[:, :, :, index].reshape(flat_shape)
            solved = factor.solve(np.ascontiguousarray(values[mode.interior]))
            out[:, :, :, index] = (mode.embed @ solved).reshape(out[:, :, :, index].shape)
        return np.fft.ifft(out, axis=3)
