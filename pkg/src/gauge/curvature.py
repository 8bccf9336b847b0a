import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from geometry import (
    SurfaceChartAtlas,
    GauduchonForm,
    frame_apply,
    covariant_apply,
    laplacian,
    integrate,
    volume,
    owned_sup,
    pointwise_norm,
    smooth_step,
)
from .connection import (
    UnitaryConnection,
    GaugeError,
    dagger,
    identity_field,
    compress,
    zeros,
)
from .dirac import excision_mask, geodesic_distance, section_cutoff, validate_singularities

logger = logging.getLogger(__name__)


IMAGINARY_TOLERANCE = 1e-8
BUMP_INNER = 0.5        # the bump metric is |z|^(2k) inside this radius
BUMP_OUTER = 1.0        # and 1 outside this one
BUMP_MASK = 0.3         # curvature inside this radius is left out of the slice flux


def bracket(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    return first @ second - second @ first


@dataclass
class CurvatureDecomposition:
    """
    Components of the curvature of (A, phi) lifted to N = X x S^1.

    F_Sigma = F(v_z, v_zbar) / (i mu), F_alpha = nabla_xi phi, and the mixed components
    F_02 = [nabla_vzbar, nabla_xi - i phi], F_20 = [nabla_vz, nabla_xi + i phi],
    F_3 = [nabla_vz, nabla_xi - i phi], F_4 = [nabla_vzbar, nabla_xi + i phi].
    F_3 and F_4 are carried for diagnostics only.
    """
    f_sigma: np.ndarray
    f_alpha: np.ndarray
    f_3: np.ndarray
    f_4: np.ndarray
    f_02: np.ndarray
    f_20: np.ndarray

    def contracted(self) -> np.ndarray:
        return GauduchonForm.contract(self.f_sigma, self.f_alpha)

    def hermite_einstein(self, constant: float) -> np.ndarray:
        """F_Sigma - F_alpha / 2 + i C I."""
        rank = self.f_sigma.shape[-1]
        return self.contracted() + 1j * constant * identity_field(rank)

    def conjugation_defect(self) -> float:
        """max |F_20 + F_02^+|; zero by construction."""
        return float(np.max(np.abs(self.f_20 + dagger(self.f_02))))

    def as_dict(self) -> Dict[str, np.ndarray]:
        return {
            'f_sigma': self.f_sigma,
            'f_alpha': self.f_alpha,
            'f_3': self.f_3,
            'f_4': self.f_4,
            'f_02': self.f_02,
            'f_20': self.f_20,
        }


def curvature(atlas: SurfaceChartAtlas, conn: UnitaryConnection) -> CurvatureDecomposition:
    """Curvature components from commutators of the covariant frame derivatives."""
    mu = atlas.expand(atlas.density_mu)
    a_vz, a_vzbar, a_xi, higgs = conn.a_vz, conn.a_vzbar, conn.a_xi, conn.higgs

    mixed = (frame_apply(atlas, a_vzbar, 'v_z', kind='zbar')
             - frame_apply(atlas, a_vz, 'v_zbar', kind='z')
             + bracket(a_vz, a_vzbar)
             + 1j * mu * a_xi)
    f_sigma = atlas.synchronize(mixed / (1j * mu))
    f_alpha = atlas.synchronize(frame_apply(atlas, higgs, 'xi') + bracket(a_xi, higgs))

    antiholomorphic = (frame_apply(atlas, a_xi, 'v_zbar')
                       - frame_apply(atlas, a_vzbar, 'xi', kind='zbar')
                       + bracket(a_vzbar, a_xi))
    antiholomorphic_higgs = frame_apply(atlas, higgs, 'v_zbar') + bracket(a_vzbar, higgs)
    holomorphic = (frame_apply(atlas, a_xi, 'v_z')
                   - frame_apply(atlas, a_vz, 'xi', kind='z')
                   + bracket(a_vz, a_xi))
    holomorphic_higgs = frame_apply(atlas, higgs, 'v_z') + bracket(a_vz, higgs)

    return CurvatureDecomposition(
        f_sigma=f_sigma,
        f_alpha=f_alpha,
        f_3=holomorphic - 1j * holomorphic_higgs,
        f_4=antiholomorphic + 1j * antiholomorphic_higgs,
        f_02=antiholomorphic - 1j * antiholomorphic_higgs,
        f_20=holomorphic + 1j * holomorphic_higgs,
    )


def excised_sup(atlas: SurfaceChartAtlas, values: np.ndarray, singularities: Sequence = ()) -> float:
    """Owned sup-norm of a per-point array (2, nx, nx, nt) outside the excision balls."""
    if not singularities:
        return owned_sup(atlas, values)
    keep = ~excision_mask(atlas, singularities)
    values = np.broadcast_to(np.abs(values), atlas.grid_shape + (atlas.n_theta,))
    region = keep & atlas.owned[..., None]
    return float(np.max(values[region])) if np.any(region) else 0.0


def he_residual(atlas: SurfaceChartAtlas, conn: UnitaryConnection, constant: float,
                curvature_data: Optional[CurvatureDecomposition] = None) -> float:
    """sup |F_Sigma - F_alpha / 2 + i C I| outside the excision balls."""
    curvature_data = curvature_data or curvature(atlas, conn)
    return excised_sup(atlas, pointwise_norm(curvature_data.hermite_einstein(constant)), conn.singularities)


def dolbeault_residual(atlas: SurfaceChartAtlas, conn: UnitaryConnection,
                       curvature_data: Optional[CurvatureDecomposition] = None) -> float:
    """sup |[nabla_vzbar, nabla_xi - i phi]|, the integrability defect of the induced structure."""
    curvature_data = curvature_data or curvature(atlas, conn)
    return excised_sup(atlas, pointwise_norm(curvature_data.f_02), conn.singularities)


def _fill_balls(atlas: SurfaceChartAtlas, values: np.ndarray, singularities: Sequence) -> np.ndarray:
    """Replace values inside each excision ball by their weighted mean over the shell eps <= R < 2 eps."""
    filled = np.array(np.broadcast_to(values, atlas.grid_shape + (atlas.n_theta,)), dtype=complex)
    weight = np.broadcast_to(atlas.quadrature_weight[..., None], filled.shape)
    for spec in singularities:
        distance = geodesic_distance(atlas, spec)
        ball = distance < spec.radius
        shell = (distance >= spec.radius) & (distance < 2 * spec.radius)
        if not np.any(weight[shell] > 0):
            raise GaugeError(f"Excision shell around z={spec.center} holds no quadrature points.")
        filled[ball] = np.sum(weight[shell] * filled[shell]) / np.sum(weight[shell])
    return filled


def degree(atlas: SurfaceChartAtlas, conn: UnitaryConnection,
           curvature_data: Optional[CurvatureDecomposition] = None,
           tolerance: float = IMAGINARY_TOLERANCE) -> float:
    """
    deg = 2i Vol(X)^-1 integral of tr F ^ alpha.

    Excision balls are filled with the shell average of tr F_Sigma; the Dirac part of the
    curvature is odd about the singular point and averages out of the shell, so what is
    filled in is the smooth background. The raw integral must be real.

    Raises:
        GaugeError: the imaginary part is not negligible, i.e. the frame is not unitary.
    """
    if conn.singularities:
        validate_singularities(atlas, conn.singularities)
    curvature_data = curvature_data or curvature(atlas, conn)
    trace = np.trace(curvature_data.f_sigma, axis1=-2, axis2=-1)
    if conn.singularities:
        trace = _fill_balls(atlas, trace, conn.singularities)
    raw = 2j * integrate(atlas, trace) / volume(atlas)
    if abs(raw.imag) > tolerance * max(1.0, abs(raw.real)):
        raise GaugeError(
            f"Degree has imaginary part {raw.imag:.3e}; the connection is not in a unitary frame."
        )
    return float(raw.real)


def slope(atlas: SurfaceChartAtlas, conn: UnitaryConnection) -> float:
    return degree(atlas, conn) / conn.rank


def subbundle_slope_excess(atlas: SurfaceChartAtlas, conn: UnitaryConnection, size: int) -> float:
    """Slope of the sub-bundle spanned by the first `size` frame vectors minus the total slope."""
    return slope(atlas, compress(conn, size)) - slope(atlas, conn)


def weitzenbock_residual(atlas: SurfaceChartAtlas, conn: UnitaryConnection, section: np.ndarray) -> float:
    """
    sup of the difference of
        mu^-1 nabla_vz nabla_vzbar s + 1/4 (nabla_xi + i phi)(nabla_xi - i phi) s
    and
        1/2 Delta s + 1/4 phi^2 s + i/4 (2 F_Sigma - F_alpha) s - i/2 nabla_xi s.
    Near singular points the section is first cut off inside 2 epsilon.
    """
    section = atlas.check_field(section)
    if section.shape[-2] != conn.rank:
        raise GaugeError(f"Section rank {section.shape[-2]} does not match connection rank {conn.rank}.")
    if conn.singularities:
        section = atlas.synchronize(section * section_cutoff(atlas, conn.singularities))

    mu = atlas.expand(atlas.density_mu)
    higgs = conn.higgs
    curvature_data = curvature(atlas, conn)

    antiholomorphic = covariant_apply(atlas, section, 'v_zbar', conn)
    horizontal = covariant_apply(atlas, antiholomorphic, 'v_z', conn, kind='zbar') / mu
    vertical_minus = atlas.synchronize(covariant_apply(atlas, section, 'xi', conn) - 1j * higgs @ section)
    vertical = covariant_apply(atlas, vertical_minus, 'xi', conn) + 1j * higgs @ vertical_minus
    left = horizontal + 0.25 * vertical

    right = (0.5 * laplacian(atlas, section, conn)
             + 0.25 * higgs @ higgs @ section
             + 0.25j * (2 * curvature_data.f_sigma - curvature_data.f_alpha) @ section
             - 0.5j * covariant_apply(atlas, section, 'xi', conn))
    difference = np.max(np.abs(left - right), axis=(-2, -1))
    return excised_sup(atlas, difference, conn.singularities)


def meromorphic_section_residual(atlas: SurfaceChartAtlas, conn: UnitaryConnection, section: np.ndarray) -> float:
    """sup |nabla_vzbar s| + sup |(nabla_xi - i phi) s|; zero for a section of the induced structure."""
    antiholomorphic = covariant_apply(atlas, section, 'v_zbar', conn)
    vertical = covariant_apply(atlas, section, 'xi', conn) - 1j * conn.higgs @ section
    return (excised_sup(atlas, np.max(np.abs(antiholomorphic), axis=(-2, -1)), conn.singularities)
            + excised_sup(atlas, np.max(np.abs(vertical), axis=(-2, -1)), conn.singularities))


def bump_connection(atlas: SurfaceChartAtlas, weight: int) -> UnitaryConnection:
    """
    Chern connection of the fiber-invariant line metric h = tau + (1 - tau) |z|^(2k) on the
    chart-0 disk, in its unitary frame: A_vz = 1/2 v_z log h, A_vzbar = -1/2 v_zbar log h.
    """
    radius = np.stack([atlas.radius[0], 1.0 / atlas.radius[1]])
    tau = smooth_step((radius - 0.5 * (BUMP_INNER + BUMP_OUTER)) / (0.5 * (BUMP_OUTER - BUMP_INNER)))
    log_metric = np.log(tau + (1 - tau) * radius ** (2 * weight))
    log_metric[~atlas.active] = 0
    field = log_metric[:, :, :, None, None, None].astype(complex)
    a_vz = 0.5 * frame_apply(atlas, field, 'v_z')
    a_vzbar = -0.5 * frame_apply(atlas, field, 'v_zbar')
    return UnitaryConnection(atlas, a_vz=a_vz, a_vzbar=a_vzbar, a_xi=zeros(atlas, 1), higgs=zeros(atlas, 1))


def bump_flux(atlas: SurfaceChartAtlas, weight: int) -> complex:
    """Integral of F_Sigma omega over the chart-0 disk outside BUMP_MASK; -2 pi i k in the continuum."""
    if weight == 0:
        return 0j
    f_sigma = curvature(atlas, bump_connection(atlas, weight)).f_sigma[0, :, :, 0, 0, 0]
    region = atlas.interior[0] & (atlas.radius[0] >= BUMP_MASK)
    area = 2 * atlas.density_mu[0] * atlas.h ** 2
    return complex(np.sum((f_sigma * area)[region]))


def bump_shift_constant(atlas: SurfaceChartAtlas,
                        weights: Sequence[Sequence[int]],
                        shifts: Sequence[float],
                        volume_x: Optional[float] = None) -> float:
    """
    Hermite-Einstein constant shift from moving singular points along their fibers,
    re-derived from the curvature of the bump metric: each point contributes
    i * flux * t / (2 pi), where the flux of a weight k is one flux quantum 2 pi per unit
    of k, and the sum is divided by n Vol(X).
    """
    if len(weights) != len(shifts):
        raise GaugeError(f"Got {len(shifts)} shifts for {len(weights)} singular points.")
    if not weights:
        return 0.0
    rank = len(weights[0])
    volume_x = volume(atlas) if volume_x is None else volume_x
    fluxes: Dict[int, complex] = {}
    total = 0j
    for vector, shift in zip(weights, shifts):
        if len(vector) != rank:
            raise GaugeError("All singular points must carry weight vectors of the same rank.")
        for k in vector:
            if k not in fluxes:
                fluxes[k] = bump_flux(atlas, k)
            total += 1j * fluxes[k] * shift / (2 * np.pi)
    logger.debug("Bump fluxes per weight: %s", {k: complex(v) for k, v in fluxes.items()})
    return float((total / (rank * volume_x)).real)
