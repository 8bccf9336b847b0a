import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from .atlas import SurfaceChartAtlas, GeometryError, FieldKind, resolve_weight

logger = logging.getLogger(__name__)


DIRECTIONS = ('v_z', 'v_zbar', 'xi')

DIRECTION_WEIGHTS = {
    'v_z': (1, 0),
    'v_zbar': (0, 1),
    'xi': (0, 0),
}


class GauduchonForm:
    """
    The time invariant Gauduchon form on N = X x S^1, kept as coefficient bookkeeping.

    Omega = d alpha - 2 alpha ^ dt. Its contraction sends d alpha to 1 and alpha ^ dt to
    -1/2, so a curvature F = F_Sigma d alpha + F_alpha alpha ^ dt + ... contracts to
    F_Sigma - F_alpha / 2.
    """
    D_ALPHA = 1.0
    ALPHA_DT = -0.5

    @classmethod
    def contract(cls, f_sigma, f_alpha):
        return cls.D_ALPHA * f_sigma + cls.ALPHA_DT * f_alpha


def scalar_field(atlas: SurfaceChartAtlas, values: np.ndarray) -> np.ndarray:
    """Lift a (2, nx, nx) or (2, nx, nx, nt) array to the field layout with a 1x1 matrix axis."""
    values = np.asarray(values, dtype=complex)
    if values.shape == atlas.grid_shape:
        values = values[:, :, :, None]
    return atlas.check_field(values[..., None, None])


def fiber_derivative(atlas: SurfaceChartAtlas, field: np.ndarray) -> np.ndarray:
    """Spectral d/d theta along the fiber axis; fiber-invariant fields give zero."""
    nt = field.shape[3]
    if nt == 1:
        return np.zeros_like(field, dtype=complex)
    modes = atlas.wavenumbers(nt).reshape((1, 1, 1, nt) + (1,) * (field.ndim - 4))
    return np.fft.ifft(1j * modes * np.fft.fft(field, axis=3), axis=3)


def chart_derivatives(atlas: SurfaceChartAtlas, field: np.ndarray):
    """Centred second-order d/dz and d/dzbar in each chart."""
    d_x = np.gradient(field, atlas.h, axis=1, edge_order=2)
    d_y = np.gradient(field, atlas.h, axis=2, edge_order=2)
    return 0.5 * (d_x - 1j * d_y), 0.5 * (d_x + 1j * d_y)


def frame_apply(atlas: SurfaceChartAtlas,
                field: np.ndarray,
                direction: str,
                kind: FieldKind = 'function') -> np.ndarray:
    """
    Apply one of the frame vector fields to a field.

    xi acts as d/d theta, v_z as d/dz - a_z d/d theta and v_zbar as
    d/dzbar - conj(a_z) d/d theta. The result is refreshed on the fringe with the
    transition weight of `kind` plus the weight of the direction, so it can be
    differentiated again. v_z applied to a field of weight (1, 0) is not tensorial
    and should not be asked for.

    Args:
        atlas (SurfaceChartAtlas): Atlas the field lives on.
        field (np.ndarray): Field of shape (2, nx, nx, nt, n, m).
        direction (str): One of 'v_z', 'v_zbar', 'xi'.
        kind: Transition weight of the input, a name from FIELD_WEIGHTS or a (p, q) pair.

    Returns:
        np.ndarray: The derivative, with the same shape as the input.
    """
    if direction not in DIRECTION_WEIGHTS:
        raise GeometryError(f"Direction '{direction}' is not supported.")
    field = atlas.check_field(field)
    d_theta = fiber_derivative(atlas, field)
    if direction == 'xi':
        out = d_theta
    else:
        d_z, d_zbar = chart_derivatives(atlas, field)
        potential = atlas.expand(atlas.gauge_potential)
        if direction == 'v_z':
            out = d_z - potential * d_theta
        else:
            out = d_zbar - np.conj(potential) * d_theta
    p, q = resolve_weight(kind)
    dp, dq = DIRECTION_WEIGHTS[direction]
    return atlas.synchronize(out, (p + dp, q + dq))


def covariant_apply(atlas: SurfaceChartAtlas,
                    section: np.ndarray,
                    direction: str,
                    conn=None,
                    kind: FieldKind = 'function') -> np.ndarray:
    """nabla_v s = v(s) + A_v s for a section of shape (..., n, 1); conn=None is the trivial connection."""
    out = frame_apply(atlas, section, direction, kind)
    if conn is None:
        return out
    component = conn.component(direction)
    if component.shape[-1] != section.shape[-2]:
        raise GeometryError(
            f"Connection rank {component.shape[-1]} does not match section rank {section.shape[-2]}."
        )
    return out + component @ section


def laplacian(atlas: SurfaceChartAtlas, field: np.ndarray, conn=None) -> np.ndarray:
    """Delta = 1/2 nabla_xi^2 + mu^-1 (nabla_vzbar nabla_vz + nabla_vz nabla_vzbar)."""
    field = atlas.check_field(field)
    xi_once = covariant_apply(atlas, field, 'xi', conn)
    vertical = covariant_apply(atlas, xi_once, 'xi', conn)
    holomorphic = covariant_apply(atlas, field, 'v_z', conn)
    antiholomorphic = covariant_apply(atlas, field, 'v_zbar', conn)
    horizontal = (covariant_apply(atlas, holomorphic, 'v_zbar', conn, kind='z')
                  + covariant_apply(atlas, antiholomorphic, 'v_z', conn, kind='zbar'))
    out = 0.5 * vertical + horizontal / atlas.expand(atlas.density_mu)
    return atlas.synchronize(out)


def integrate(atlas: SurfaceChartAtlas, scalar_field_values: np.ndarray) -> complex:
    """Quadrature of f d alpha ^ alpha over X."""
    values = np.asarray(scalar_field_values)
    if values.ndim == 6:
        if values.shape[4:] != (1, 1):
            raise GeometryError(f"integrate expects a scalar field. Received matrix shape {values.shape[4:]}")
        values = values[..., 0, 0]
    if values.ndim == 3:
        values = values[..., None]
    if values.shape[:3] != atlas.grid_shape:
        raise GeometryError(f"Field shape {values.shape} does not match atlas grid {atlas.grid_shape}.")
    fiber_mean = values.mean(axis=3)
    return complex(2 * np.pi * np.sum(atlas.quadrature_weight * fiber_mean))


def volume(atlas: SurfaceChartAtlas) -> float:
    """Vol(X) by quadrature of d alpha ^ alpha; 4 pi^2 k in the continuum."""
    return integrate(atlas, np.ones(atlas.grid_shape)).real


def base_area(atlas: SurfaceChartAtlas) -> float:
    """Integral of omega over the base; 2 pi k in the continuum."""
    return float(np.sum(atlas.quadrature_weight))


def owned_sup(atlas: SurfaceChartAtlas, values: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """Max modulus over owned points (optionally intersected with `mask`)."""
    region = atlas.owned if mask is None else atlas.owned & mask
    values = np.abs(np.asarray(values))
    region = region.reshape(region.shape + (1,) * (values.ndim - 3))
    region = np.broadcast_to(region, values.shape)
    if not np.any(region):
        return 0.0
    return float(np.max(values[region]))


def pointwise_norm(field: np.ndarray) -> np.ndarray:
    """Operator norm of every matrix in a field."""
    if field.shape[-2:] == (1, 1):
        return np.abs(field[..., 0, 0])
    return np.linalg.norm(field, ord=2, axis=(-2, -1))


def curvature_density(atlas: SurfaceChartAtlas) -> np.ndarray:
    """(d_z conj(a_z) - d_zbar a_z) / i by finite differences; equals mu when d alpha = pi* omega."""
    potential = scalar_field(atlas, atlas.gauge_potential)
    d_z, _ = chart_derivatives(atlas, np.conj(potential))
    _, d_zbar = chart_derivatives(atlas, potential)
    return ((d_z - d_zbar) / 1j)[:, :, :, 0, 0, 0]


def gauduchon_residual(atlas: SurfaceChartAtlas) -> float:
    """
    Max-norm evaluation of the coefficients of d dbar Omega on N.

    With Omega = d alpha - 2 alpha ^ dt and alpha stored fiber-invariant, the
    coefficients reduce to two discrete quantities: the mismatch of the curvature
    density of alpha with mu (so that d alpha is the pullback of omega), and the
    mismatch of mu across the chart overlap as a (1,1)-density. Both vanish for a
    consistent atlas; the first converges at second order.
    """
    density = curvature_density(atlas)
    closure_term = owned_sup(atlas, density - atlas.density_mu)

    mu = scalar_field(atlas, atlas.density_mu)
    transported = atlas.transport(mu, 'density')[:, 0, 0, 0]
    stored = atlas.density_mu.reshape(-1)[atlas.fringe_transfer.targets]
    overlap_term = float(np.max(np.abs(transported - stored)))

    logger.debug("Gauduchon terms: closure=%.3e overlap=%.3e", closure_term, overlap_term)
    return max(closure_term, overlap_term)


def overlap_residual(atlas: SurfaceChartAtlas, field: np.ndarray, kind: FieldKind = 'function') -> float:
    """
    Largest mismatch between a field's stored fringe values and the values the other chart
    transports there with the declared transition.
    """
    field = atlas.check_field(field)
    transported = atlas.transport(field, kind)
    stored = field.reshape((2 * atlas.nx * atlas.nx,) + field.shape[3:])[atlas.fringe_transfer.targets]
    return float(np.max(np.abs(transported - stored)))


def commutator_residuals(atlas: SurfaceChartAtlas, field: np.ndarray) -> Dict[str, float]:
    """
    Owned sup-norms of [v_z, v_zbar] f + i mu xi f and of [xi, v_z] f.
    """
    field = atlas.check_field(field)
    v_z = frame_apply(atlas, field, 'v_z')
    v_zbar = frame_apply(atlas, field, 'v_zbar')
    xi = frame_apply(atlas, field, 'xi')
    bracket = (frame_apply(atlas, v_zbar, 'v_z', kind='zbar')
               - frame_apply(atlas, v_z, 'v_zbar', kind='z'))
    lie = bracket + 1j * atlas.expand(atlas.density_mu) * xi
    vertical = frame_apply(atlas, v_z, 'xi', kind='z') - frame_apply(atlas, xi, 'v_z')
    return {
        'v_z_v_zbar': owned_sup(atlas, lie),
        'xi_v_z': owned_sup(atlas, vertical),
    }


def inner_product(atlas: SurfaceChartAtlas, first: np.ndarray, second: np.ndarray) -> complex:
    """<s, t> = integral of s^dagger t over X."""
    pointwise = np.sum(np.conj(first) * second, axis=(-2, -1))
    return integrate(atlas, pointwise)


def gradient_energy(atlas: SurfaceChartAtlas, section: np.ndarray, conn=None) -> float:
    """||nabla s||^2 = integral of 1/2 |nabla_xi s|^2 + mu^-1 (|nabla_vz s|^2 + |nabla_vzbar s|^2)."""
    mu = atlas.expand(atlas.density_mu)
    density = 0.5 * np.abs(covariant_apply(atlas, section, 'xi', conn)) ** 2
    density = density + (np.abs(covariant_apply(atlas, section, 'v_z', conn)) ** 2
                         + np.abs(covariant_apply(atlas, section, 'v_zbar', conn)) ** 2) / mu
    return integrate(atlas, np.sum(density, axis=(-2, -1))).real


def integration_by_parts_defect(atlas: SurfaceChartAtlas, section: np.ndarray, conn=None) -> float:
    """|<s, Delta s> + ||nabla s||^2| / ||nabla s||^2."""
    energy = gradient_energy(atlas, section, conn)
    if energy == 0:
        raise GeometryError("Section is covariantly constant; the relative defect is undefined.")
    pairing = inner_product(atlas, section, laplacian(atlas, section, conn))
    return abs(pairing + energy) / energy


def convergence_ratio(errors: Sequence[float]) -> List[float]:
    """Successive error ratios e_i / e_{i+1} of a refinement sweep."""
    return [errors[i] / errors[i + 1] if errors[i + 1] > 0 else float('inf')
            for i in range(len(errors) - 1)]


def field_rows(atlas: SurfaceChartAtlas, field: np.ndarray, mask: Optional[np.ndarray] = None) -> List[Dict]:
    """
    Flatten a field into CSV rows (chart, i, j, l, row, col, re, im), one per matrix entry
    at every point of `mask` (the owned points by default).

    Accepts per-point (2, nx, nx), fiber-resolved (2, nx, nx, nt) and full field layouts.
    """
    values = np.asarray(field)
    if values.ndim == 3:
        values = values[..., None]
    if values.ndim == 4:
        values = values[..., None, None]
    if values.ndim != 6 or values.shape[:3] != atlas.grid_shape:
        raise GeometryError(f"Field shape {np.shape(field)} does not match atlas grid {atlas.grid_shape}.")
    region = atlas.owned if mask is None else mask
    charts, i, j = np.nonzero(region)
    selected = values[charts, i, j]
    point, fiber, row, col = np.indices(selected.shape).reshape(4, -1)
    flat = selected.reshape(-1)
    return [{'chart': int(charts[p]), 'i': int(i[p]), 'j': int(j[p]), 'l': int(l), 'row': int(r), 'col': int(c),
             're': float(v.real), 'im': float(v.imag)}
            for p, l, r, c, v in zip(point, fiber, row, col, flat)]
