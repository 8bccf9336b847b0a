import math
import logging
from functools import cached_property
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy import sparse

logger = logging.getLogger(__name__)


COMPUTE_RADIUS = 1.2        # each chart computes |z| <= 1.2
OWNED_RADIUS = 1.0          # each chart reports |z| <= 1
FRINGE_CELLS = 3            # width of the band filled from the other chart
PARTITION_RADIUS = 1.19     # support of the quadrature partition of unity
MIN_N_Z = 8
MIN_N_THETA = 8

# Transition weights (p, q): a component picks up (dw/dz)^p * conj(dw/dz)^q
FIELD_WEIGHTS = {
    'function': (0, 0),
    'z': (1, 0),
    'zbar': (0, 1),
    'density': (1, 1),
}

FieldKind = Union[str, Tuple[int, int]]


class GeometryError(ValueError):
    """Raised when an atlas cannot be built or a field does not live on it."""


def _flat_bump(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    positive = x > 0
    out[positive] = np.exp(-1.0 / x[positive])
    return out


def smooth_step(x) -> np.ndarray:
    """Smooth step equal to 0 for x <= -1 and 1 for x >= 1, with step(x) + step(-x) = 1."""
    x = np.asarray(x, dtype=float)
    rising = _flat_bump(1.0 + x)
    falling = _flat_bump(1.0 - x)
    return rising / (rising + falling)


def cubic_lagrange_weights(t: np.ndarray) -> np.ndarray:
    """Four-point Lagrange weights for stencil offsets -1, 0, 1, 2 at fractional position t."""
    return np.stack([
        -t * (t - 1) * (t - 2) / 6,
        (t + 1) * (t - 1) * (t - 2) / 2,
        -(t + 1) * t * (t - 2) / 2,
        (t + 1) * t * (t - 1) / 6,
    ], axis=-1)


def resolve_weight(kind: FieldKind) -> Tuple[int, int]:
    if isinstance(kind, str):
        if kind not in FIELD_WEIGHTS:
            raise GeometryError(f"Field kind '{kind}' is not supported.")
        return FIELD_WEIGHTS[kind]
    return int(kind[0]), int(kind[1])


class FringeTransfer(NamedTuple):
    targets: np.ndarray       # flat indices of fringe points into a (2, nx, nx) array
    matrix: sparse.csr_matrix # interpolation from the other chart's interior
    derivative: np.ndarray    # d(source coordinate)/d(target coordinate) at each target
    shift: np.ndarray         # fiber offset theta_source - theta_target


class SurfaceChartAtlas:
    """
    Two-chart discretization of the regular Sasakian three-fold X, the principal circle
    bundle of degree k over the Riemann sphere with the round Kaehler density.

    Chart 0 uses z and chart 1 uses w = 1/z. Both carry the same cell-centred Cartesian
    grid x_j = (j - M + 1/2) h with h = 1/n_z, so no grid point sits on a chart centre.
    Points with |z| <= 1.2 are computed, a three-cell fringe outside that disk is filled
    from the other chart by cubic interpolation, and everything further out is inert.

    Fields on the atlas are complex arrays of shape (2, nx, nx, nt, n, n) where nt is
    either n_theta or 1 (fiber-invariant fields broadcast against resolved ones).

    Attributes:
        bundle_degree (int): Degree k of the circle bundle.
        n_z (int): Cells per unit length in each chart.
        n_theta (int): Fiber samples over the period 2 pi.
        h (float): Chart grid spacing.
        nx (int): Grid points per axis.
        coordinate (np.ndarray): Chart coordinate at every grid point, shape (2, nx, nx).
        radius (np.ndarray): Modulus of the chart coordinate.
        theta (np.ndarray): Fiber sample positions.
        density_mu (np.ndarray): Kaehler density mu = k / (1 + |z|^2)^2.
        gauge_potential (np.ndarray): a_z = (k / 2i) conj(z) / (1 + |z|^2), so that
            alpha = d theta + a_z dz + conj(a_z) d conj(z).
        interior, fringe, active, owned (np.ndarray): Boolean point classes per chart.
    """

    def __init__(self,
                 bundle_degree: int,
                 n_z: int,
                 n_theta: int,
                 density_offset: Optional[Tuple[int, float]] = None) -> None:
        if int(bundle_degree) != bundle_degree or bundle_degree < 1:
            raise GeometryError(f"Bundle degree must be a positive integer. Received: {bundle_degree}")
        if n_z < MIN_N_Z:
            raise GeometryError(f"n_z must be at least {MIN_N_Z} for the stencils to fit. Received: {n_z}")
        if n_theta < MIN_N_THETA:
            raise GeometryError(f"n_theta must be at least {MIN_N_THETA}. Received: {n_theta}")

        self.bundle_degree = int(bundle_degree)
        self.n_z = int(n_z)
        self.n_theta = int(n_theta)
        self.h = 1.0 / self.n_z
        self.half_width = math.ceil(COMPUTE_RADIUS * self.n_z) + FRINGE_CELLS + 1
        self.nx = 2 * self.half_width
        self.x = (np.arange(self.nx) - self.half_width + 0.5) * self.h

        xx, yy = np.meshgrid(self.x, self.x, indexing='ij')
        chart_coordinate = xx + 1j * yy
        self.coordinate = np.stack([chart_coordinate, chart_coordinate])
        self.radius = np.abs(self.coordinate)
        self.theta = 2 * np.pi * np.arange(self.n_theta) / self.n_theta

        self.interior = self.radius <= COMPUTE_RADIUS
        self.fringe = (~self.interior) & (self.radius <= COMPUTE_RADIUS + FRINGE_CELLS * self.h)
        self.active = self.interior | self.fringe
        self.owned = self.radius <= OWNED_RADIUS

        r2 = self.radius ** 2
        self.density_mu = self.bundle_degree / (1 + r2) ** 2
        if density_offset is not None:
            chart, delta = density_offset
            self.density_mu[chart] = self.density_mu[chart] + delta
        self.gauge_potential = (self.bundle_degree / 2j) * np.conj(self.coordinate) / (1 + r2)
        self.density_offset = density_offset

        if np.any(self.density_mu[self.active] <= 0):
            raise GeometryError("Kaehler density must be positive at every sample point.")

        logger.debug("Built atlas k=%d n_z=%d n_theta=%d (%d points per chart axis)",
                     self.bundle_degree, self.n_z, self.n_theta, self.nx)

    def __repr__(self) -> str:
        return (f"SurfaceChartAtlas(bundle_degree={self.bundle_degree}, "
                f"n_z={self.n_z}, n_theta={self.n_theta})")

    @property
    def grid_shape(self) -> Tuple[int, int, int]:
        return (2, self.nx, self.nx)

    def expand(self, values: np.ndarray) -> np.ndarray:
        """Reshape a per-point (2, nx, nx) array so it broadcasts against fields."""
        return values[:, :, :, None, None, None]

    def wavenumbers(self, nt: int) -> np.ndarray:
        """Integer fiber wavenumbers in FFT order with the Nyquist mode zeroed."""
        modes = np.fft.fftfreq(nt, 1.0 / nt)
        if nt % 2 == 0:
            modes[nt // 2] = 0.0
        return modes

    def check_field(self, field: np.ndarray) -> np.ndarray:
        field = np.asarray(field)
        if field.ndim != 6 or field.shape[:3] != self.grid_shape:
            raise GeometryError(
                f"Field shape {field.shape} does not match atlas grid {self.grid_shape} "
                f"with fiber and matrix axes."
            )
        if field.shape[3] not in (1, self.n_theta):
            raise GeometryError(
                f"Fiber axis of length {field.shape[3]} must be 1 or {self.n_theta}."
            )
        return field

    @cached_property
    def partition_weight(self) -> np.ndarray:
        """chi_c with chi_0(z) + chi_1(1/z) = 1, supported in |z| < PARTITION_RADIUS."""
        width = math.log(PARTITION_RADIUS)
        return smooth_step(-np.log(self.radius) / width)

    @cached_property
    def quadrature_weight(self) -> np.ndarray:
        """Trapezoid weights of the area form 2 mu dx dy, blended by the partition of unity."""
        return self.partition_weight * 2 * self.density_mu * self.h ** 2

    @cached_property
    def fringe_transfer(self) -> FringeTransfer:
        nx = self.nx
        targets = np.flatnonzero(self.fringe.reshape(-1))
        chart = targets // (nx * nx)
        zeta = self.coordinate.reshape(-1)[targets]
        source = 1.0 / zeta

        grid_x = source.real / self.h + self.half_width - 0.5
        grid_y = source.imag / self.h + self.half_width - 0.5
        base_x = np.floor(grid_x).astype(int)
        base_y = np.floor(grid_y).astype(int)
        weights_x = cubic_lagrange_weights(grid_x - base_x)
        weights_y = cubic_lagrange_weights(grid_y - base_y)

        offsets = np.arange(-1, 3)
        columns = ((1 - chart)[:, None, None] * nx * nx
                   + (base_x[:, None, None] + offsets[None, :, None]) * nx
                   + (base_y[:, None, None] + offsets[None, None, :]))
        values = weights_x[:, :, None] * weights_y[:, None, :]
        rows = np.broadcast_to(np.arange(targets.size)[:, None, None], columns.shape)

        if not np.all(self.interior.reshape(-1)[columns]):
            raise GeometryError("Fringe interpolation stencil leaves the computed disk; refine n_z.")

        matrix = sparse.csr_matrix(
            (values.ravel(), (rows.ravel(), columns.ravel())),
            shape=(targets.size, 2 * nx * nx),
        )
        logger.debug("Fringe transfer: %d target points, %d stencil entries", targets.size, matrix.nnz)
        return FringeTransfer(
            targets=targets,
            matrix=matrix,
            derivative=-1.0 / zeta ** 2,
            shift=self.bundle_degree * np.angle(zeta),
        )

    def shift_fiber(self, values: np.ndarray, shift: np.ndarray, axis: int = 1) -> np.ndarray:
        """Evaluate g(theta + shift) spectrally, one shift per leading index."""
        nt = values.shape[axis]
        if nt == 1:
            return values
        modes = np.fft.fftfreq(nt, 1.0 / nt)
        phase = np.exp(1j * shift[:, None] * modes[None, :])
        if nt % 2 == 0:
            phase[:, nt // 2] = np.cos(shift * nt / 2)
        phase = phase.reshape(phase.shape + (1,) * (values.ndim - 2))
        return np.fft.ifft(np.fft.fft(values, axis=axis) * phase, axis=axis)

    def transport(self, field: np.ndarray, kind: FieldKind = 'function') -> np.ndarray:
        """
        Values the other chart assigns to every fringe point, shape (n_fringe, nt, n, n).
        """
        p, q = resolve_weight(kind)
        transfer = self.fringe_transfer
        flat = field.reshape((2 * self.nx * self.nx, -1))
        values = transfer.matrix @ flat
        factor = transfer.derivative ** p * np.conj(transfer.derivative) ** q
        values = (values * factor[:, None]).reshape((transfer.targets.size,) + field.shape[3:])
        return self.shift_fiber(values, transfer.shift)

    def synchronize(self, field: np.ndarray, kind: FieldKind = 'function') -> np.ndarray:
        """Refill the fringe from the other chart and zero the inert points."""
        field = self.check_field(field)
        out = np.array(field, dtype=complex, copy=True)
        out.reshape((2 * self.nx * self.nx,) + field.shape[3:])[self.fringe_transfer.targets] = \
            self.transport(field, kind)
        out[~self.active] = 0
        return out

    def overlap_points(self) -> np.ndarray:
        """Mask of points that both charts compute: 1/1.2 <= |z| <= 1.2."""
        return self.interior & (self.radius >= 1.0 / COMPUTE_RADIUS)


def build_atlas(k: int, n_z: int, n_theta: int) -> SurfaceChartAtlas:
    """Build the two-chart atlas of the degree-k bundle over the Riemann sphere."""
    return SurfaceChartAtlas(k, n_z, n_theta)
