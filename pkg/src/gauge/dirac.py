import logging
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from geometry import SurfaceChartAtlas, smooth_step
from geometry.atlas import COMPUTE_RADIUS
from .connection import DiracSingularitySpec, GaugeError

logger = logging.getLogger(__name__)


def center_in_chart(atlas: SurfaceChartAtlas, spec: DiracSingularitySpec, chart: int) -> Optional[Tuple[complex, float]]:
    """Chart coordinate and fiber position of the singular point seen from `chart` (None at infinity)."""
    if chart == spec.chart:
        return complex(spec.center), float(spec.theta)
    if spec.center == 0:
        return None
    return 1.0 / complex(spec.center), float(spec.theta) + atlas.bundle_degree * float(np.angle(spec.center))


def frozen_frame(atlas: SurfaceChartAtlas, center: complex) -> Tuple[float, float, float]:
    """sqrt(2 mu), a_x, a_y of the metric 2 (alpha^2 + mu |dz|^2) frozen at `center`."""
    k = atlas.bundle_degree
    r2 = abs(center) ** 2
    mu = k / (1 + r2) ** 2
    potential = (k / 2j) * np.conj(center) / (1 + r2)
    return float(np.sqrt(2 * mu)), float(2 * potential.real), float(-2 * potential.imag)


def local_coordinates(atlas: SurfaceChartAtlas,
                      center: complex,
                      theta0: float,
                      z: np.ndarray,
                      theta: np.ndarray) -> np.ndarray:
    """
    Oriented Euclidean coordinates (X1, X2, X3) around (center, theta0) for the frozen
    metric: X1 + i X2 = sqrt(2 mu) (z - center), X3 = sqrt(2) (d theta + a_x dx + a_y dy).
    """
    scale, a_x, a_y = frozen_frame(atlas, center)
    offset = z - center
    d_theta = np.mod(theta - theta0 + np.pi, 2 * np.pi) - np.pi
    return np.stack(np.broadcast_arrays(
        scale * offset.real,
        scale * offset.imag,
        np.sqrt(2) * (d_theta + a_x * offset.real + a_y * offset.imag),
    ), axis=-1)


def geodesic_distance(atlas: SurfaceChartAtlas, spec: DiracSingularitySpec) -> np.ndarray:
    """Frozen-metric distance from the singular point at every grid point, shape (2, nx, nx, n_theta)."""
    distance = np.full(atlas.grid_shape + (atlas.n_theta,), np.inf)
    theta = atlas.theta[None, None, :]
    for chart in (0, 1):
        located = center_in_chart(atlas, spec, chart)
        if located is None:
            continue
        center, theta0 = located
        coords = local_coordinates(atlas, center, theta0, atlas.coordinate[chart][:, :, None], theta)
        distance[chart] = np.linalg.norm(coords, axis=-1)
    distance[~atlas.active] = np.inf
    return distance


def excision_mask(atlas: SurfaceChartAtlas, singularities: Iterable[DiracSingularitySpec], factor: float = 1.0) -> np.ndarray:
    """True inside every ball R < factor * epsilon, shape (2, nx, nx, n_theta)."""
    mask = np.zeros(atlas.grid_shape + (atlas.n_theta,), dtype=bool)
    for spec in singularities:
        mask |= geodesic_distance(atlas, spec) < factor * spec.radius
    return mask


def section_cutoff(atlas: SurfaceChartAtlas, singularities: Sequence[DiracSingularitySpec]) -> np.ndarray:
    """Smooth cutoff vanishing for R <= 2 epsilon and equal to 1 for R >= 4 epsilon, as a scalar field."""
    cutoff = np.ones(atlas.grid_shape + (atlas.n_theta,))
    for spec in singularities:
        cutoff = cutoff * smooth_step(geodesic_distance(atlas, spec) / spec.radius - 3.0)
    return cutoff[..., None, None].astype(complex)


def validate_singularities(atlas: SurfaceChartAtlas, singularities: Sequence[DiracSingularitySpec]) -> None:
    """Check that every excision ball fits in its chart, resolves on the grid and misses the others."""
    for position, spec in enumerate(singularities):
        scale, _, _ = frozen_frame(atlas, spec.center)
        spacing = scale * atlas.h
        if spec.radius <= 2 * spacing:
            raise GaugeError(
                f"Excision radius {spec.radius} must exceed two grid spacings ({2 * spacing:.4f})."
            )
        if abs(spec.center) + spec.radius / scale > COMPUTE_RADIUS:
            raise GaugeError(
                f"Excision ball around z={spec.center} in chart {spec.chart} crosses the chart boundary."
            )
        if spec.radius / np.sqrt(2) >= np.pi:
            raise GaugeError(f"Excision ball of radius {spec.radius} wraps around the fiber.")
        for other in singularities[position + 1:]:
            located = center_in_chart(atlas, other, spec.chart)
            if located is None:
                continue
            coords = local_coordinates(atlas, spec.center, spec.theta, np.asarray(located[0]), np.asarray(located[1]))
            if np.linalg.norm(coords) <= spec.radius + other.radius:
                raise GaugeError(
                    f"Excision balls around z={spec.center} and z={other.center} overlap."
                )


class DiracLocalModel:
    """
    Direct sum of abelian Dirac monopoles of weights k_j around one point, in the frozen
    Euclidean frame. The north and south trivializations differ by diag(exp(i k_j psi)),
    phi = diag(i k_j / (2R)) and the curvature satisfies F = -*d phi.

    Attributes:
        atlas (SurfaceChartAtlas): Atlas supplying the frozen metric.
        spec (DiracSingularitySpec): Location, weights and excision radius.
    """

    def __init__(self, atlas: SurfaceChartAtlas, spec: DiracSingularitySpec) -> None:
        self.atlas = atlas
        self.spec = spec
        self.weights = np.asarray(spec.weights, dtype=float)
        self.scale, self.a_x, self.a_y = frozen_frame(atlas, spec.center)

    def coordinates(self, z: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return local_coordinates(self.atlas, self.spec.center, self.spec.theta, np.asarray(z), np.asarray(theta))

    def distance(self, z: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return np.linalg.norm(self.coordinates(z, theta), axis=-1)

    def _diagonal(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros(values.shape + (self.weights.size,) * 2, dtype=complex)
        index = np.arange(self.weights.size)
        out[..., index, index] = values[..., None] * self.weights
        return out

    def higgs(self, z: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return self._diagonal(1j / (2 * self.distance(z, theta)))

    def connection(self, z: np.ndarray, theta: np.ndarray, patch: str = 'north') -> Dict[str, np.ndarray]:
        """Frame components of the model connection in the north or south trivialization."""
        coords = self.coordinates(z, theta)
        radius = np.linalg.norm(coords, axis=-1)
        cosine = coords[..., 2] / radius
        offset = np.asarray(z) - self.spec.center
        if patch == 'north':
            profile = (1 - cosine) / (4 * offset)
        elif patch == 'south':
            profile = -(1 + cosine) / (4 * offset)
        else:
            raise GaugeError(f"Patch '{patch}' is not supported.")
        a_vz = self._diagonal(profile)
        return {
            'a_vz': a_vz,
            'a_vzbar': -np.conj(np.swapaxes(a_vz, -1, -2)),
            'a_xi': np.zeros_like(a_vz),
        }

    def transition(self, z: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """g = diag(exp(i k_j psi)) with psi = arg(z - center)."""
        psi = np.angle(np.asarray(z) - self.spec.center)
        out = np.zeros(np.shape(psi) + (self.weights.size,) * 2, dtype=complex)
        index = np.arange(self.weights.size)
        out[..., index, index] = np.exp(1j * psi[..., None] * self.weights)
        return out

    def euclidean_potential(self, coords: np.ndarray) -> np.ndarray:
        """North-gauge potential (A_1, A_2, A_3) per weight, in the local Euclidean coordinates."""
        radius = np.linalg.norm(coords, axis=-1)
        planar = coords[..., 0] ** 2 + coords[..., 1] ** 2
        profile = (1j / 2) * (1 - coords[..., 2] / radius) / planar
        first = -profile * coords[..., 1]
        second = profile * coords[..., 0]
        components = np.stack([first, second, np.zeros_like(first)], axis=-1)
        return components[..., None, :] * self.weights[:, None]

    def euclidean_higgs(self, coords: np.ndarray) -> np.ndarray:
        radius = np.linalg.norm(coords, axis=-1)
        return (1j / (2 * radius))[..., None] * self.weights


def dirac_local_model(atlas: SurfaceChartAtlas,
                      weights: Sequence[int],
                      center: Tuple[int, complex, float],
                      radius: float,
                      others: Sequence[DiracSingularitySpec] = ()) -> DiracLocalModel:
    """
    Build the Dirac local model of the given weights around center = (chart, z0, theta0).

    Raises:
        GaugeError: the ball crosses the chart boundary, is under-resolved or meets another singularity.
    """
    chart, z0, theta0 = center
    spec = DiracSingularitySpec(int(chart), complex(z0), float(theta0), tuple(int(k) for k in weights), float(radius))
    validate_singularities(atlas, [spec] + list(others))
    return DiracLocalModel(atlas, spec)


def sample_ball(model: DiracLocalModel, count: int, rng: np.random.Generator,
                inner: float = 0.2, outer: float = 1.0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Random points of the punctured ball, returned as (z, theta, local coordinates)."""
    directions = rng.standard_normal((count, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = model.spec.radius * rng.uniform(inner, outer, count)
    coords = directions * radii[:, None]
    offset = (coords[:, 0] + 1j * coords[:, 1]) / model.scale
    z = model.spec.center + offset
    theta = model.spec.theta + coords[:, 2] / np.sqrt(2) - model.a_x * offset.real - model.a_y * offset.imag
    return z, theta, coords


def verify_dirac_model(model: DiracLocalModel, samples: int = 200, seed: int = 0) -> Dict[str, float]:
    """
    Numerical checks of the local model at random points of the punctured ball:
    the i k / (2R) leading term of phi, the clutching relation A_N - A_S = g^-1 dg, and
    the Bogomolny relation F = -*d phi (central differences in the local frame).
    """
    rng = np.random.default_rng(seed)
    z, theta, coords = sample_ball(model, samples, rng)
    radius = np.linalg.norm(coords, axis=-1)

    higgs = np.diagonal(model.higgs(z, theta), axis1=-2, axis2=-1)
    leading = np.max(np.abs(higgs * radius[:, None] - 0.5j * model.weights)) if model.weights.size else 0.0

    north = model.connection(z, theta, 'north')['a_vz']
    south = model.connection(z, theta, 'south')['a_vz']
    step = 1e-6 * model.spec.radius / model.scale
    psi = lambda point: np.angle(point - model.spec.center)
    d_x = np.angle(np.exp(1j * (psi(z + step) - psi(z - step)))) / (2 * step)
    d_y = np.angle(np.exp(1j * (psi(z + 1j * step) - psi(z - 1j * step)))) / (2 * step)
    clutching = 1j * 0.5 * (d_x - 1j * d_y)
    transition = np.max(np.abs(np.diagonal(north - south, axis1=-2, axis2=-1) - clutching[:, None] * model.weights)) \
        if model.weights.size else 0.0

    away_from_string = coords[:, 2] / radius > -0.5
    points = coords[away_from_string]
    delta = 1e-5 * model.spec.radius
    basis = np.eye(3)

    def partial(function, axis):
        return (function(points + delta * basis[axis]) - function(points - delta * basis[axis])) / (2 * delta)

    d_potential = [partial(model.euclidean_potential, axis) for axis in range(3)]
    d_higgs = [partial(model.euclidean_higgs, axis) for axis in range(3)]
    bogomolny = 0.0
    scale = 0.0
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        field_strength = d_potential[a][..., b] - d_potential[b][..., a]
        bogomolny = max(bogomolny, float(np.max(np.abs(field_strength + d_higgs[c]), initial=0.0)))
        scale = max(scale, float(np.max(np.abs(d_higgs[c]), initial=0.0)))

    report = {
        'higgs_leading': float(leading),
        'transition': float(transition),
        'bogomolny': bogomolny / scale if scale else bogomolny,
    }
    logger.info("Dirac model weights=%s: %s", list(model.spec.weights), report)
    return report
