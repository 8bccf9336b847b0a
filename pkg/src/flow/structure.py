import logging
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from geometry import SurfaceChartAtlas, FieldGenerator, frame_apply
from gauge import (
    UnitaryConnection,
    DiracSingularitySpec,
    dagger,
    identity_field,
    excised_sup,
)
from gauge.curvature import bracket

logger = logging.getLogger(__name__)


POSITIVITY_TOLERANCE = 1e-12


class FlowError(ValueError):
    """Raised when a structure, metric or flow run is malformed."""


class FlowStalled(FlowError):
    """The step size underflowed or the iteration budget ran out with a finite residual."""


class FlowDiverged(FlowError):
    """The residual became non-finite."""


class MeromorphicStructureData:
    """
    A meromorphic structure on a rank-n bundle over X in a fixed smooth frame:
    nabla_vzbar = v_zbar + B and nabla^c_xi = xi + P, where P = A_xi - i phi.

    Attributes:
        atlas (SurfaceChartAtlas): Atlas the operators live on.
        dbar (np.ndarray): B, a field of weight (0, 1).
        phi_c (np.ndarray): P, a function-valued matrix field.
        singularities (List[DiracSingularitySpec]): Points excised from the residuals.
    """

    def __init__(self,
                 atlas: SurfaceChartAtlas,
                 dbar: np.ndarray,
                 phi_c: np.ndarray,
                 singularities: Iterable[DiracSingularitySpec] = ()) -> None:
        self.atlas = atlas
        self.dbar = atlas.check_field(np.asarray(dbar, dtype=complex))
        self.phi_c = atlas.check_field(np.asarray(phi_c, dtype=complex))
        if self.dbar.shape[-2:] != self.phi_c.shape[-2:] or self.dbar.shape[-1] != self.dbar.shape[-2]:
            raise FlowError(
                f"Structure operators have mismatched matrix shapes {self.dbar.shape[-2:]} and {self.phi_c.shape[-2:]}."
            )
        self.rank = self.dbar.shape[-1]
        self.singularities = list(singularities)

    def commutator(self) -> np.ndarray:
        """[nabla_vzbar, nabla^c_xi] = v_zbar P - xi B + [B, P]."""
        return (frame_apply(self.atlas, self.phi_c, 'v_zbar')
                - frame_apply(self.atlas, self.dbar, 'xi', kind='zbar')
                + bracket(self.dbar, self.phi_c))

    @cached_property
    def integrability_residual(self) -> float:
        values = np.linalg.norm(self.commutator(), ord=2, axis=(-2, -1)) if self.rank > 1 \
            else np.abs(self.commutator()[..., 0, 0])
        return excised_sup(self.atlas, values, self.singularities)


def structure_from_connection(conn: UnitaryConnection) -> MeromorphicStructureData:
    """The structure induced by a unitary connection: B = A_vzbar, P = A_xi - i phi."""
    return MeromorphicStructureData(conn.atlas, conn.a_vzbar, conn.a_xi - 1j * conn.higgs, conn.singularities)


def _zeros(atlas: SurfaceChartAtlas, rank: int) -> np.ndarray:
    return np.zeros(atlas.grid_shape + (1, rank, rank), dtype=complex)


def trivial_structure(atlas: SurfaceChartAtlas, rank: int = 1) -> MeromorphicStructureData:
    return MeromorphicStructureData(atlas, _zeros(atlas, rank), _zeros(atlas, rank))


def diagonal_structure(atlas: SurfaceChartAtlas, constants: Sequence[float]) -> MeromorphicStructureData:
    """B = 0, P = diag(-i C_j); the direct sum of the structures induced by -i C_j alpha."""
    rank = len(constants)
    phi_c = _zeros(atlas, rank)
    phi_c[..., np.arange(rank), np.arange(rank)] = -1j * np.asarray(constants, dtype=float)
    phi_c[~atlas.active] = 0
    return MeromorphicStructureData(atlas, _zeros(atlas, rank), phi_c)


def contact_structure(atlas: SurfaceChartAtlas, constant: float, rank: int = 1) -> MeromorphicStructureData:
    return diagonal_structure(atlas, [constant] * rank)


def complex_gauge(structure: MeromorphicStructureData, gauge: np.ndarray) -> MeromorphicStructureData:
    """B -> g^-1 B g + g^-1 v_zbar(g) and P -> g^-1 P g + g^-1 xi(g) for an invertible field g."""
    atlas = structure.atlas
    gauge = atlas.check_field(gauge)
    inverse = np.zeros_like(gauge)
    inverse[atlas.active] = np.linalg.inv(gauge[atlas.active])
    dbar = inverse @ structure.dbar @ gauge + inverse @ frame_apply(atlas, gauge, 'v_zbar')
    phi_c = inverse @ structure.phi_c @ gauge + inverse @ frame_apply(atlas, gauge, 'xi')
    return MeromorphicStructureData(
        atlas,
        atlas.synchronize(dbar, 'zbar'),
        atlas.synchronize(phi_c),
        structure.singularities,
    )


def exponential_gauge(atlas: SurfaceChartAtlas, exponent: np.ndarray) -> np.ndarray:
    """exp(w) for a scalar field w, as a 1x1 gauge field."""
    gauge = np.exp(exponent)
    gauge[~atlas.active] = 0
    return gauge


def structure_direct_sum(structures: Sequence[MeromorphicStructureData]) -> MeromorphicStructureData:
    atlas = structures[0].atlas
    total = sum(s.rank for s in structures)
    nt = max(max(s.dbar.shape[3], s.phi_c.shape[3]) for s in structures)
    dbar = np.zeros(atlas.grid_shape + (nt, total, total), dtype=complex)
    phi_c = np.zeros_like(dbar)
    offset = 0
    for s in structures:
        block = slice(offset, offset + s.rank)
        dbar[..., block, block] = s.dbar
        phi_c[..., block, block] = s.phi_c
        offset += s.rank
    return MeromorphicStructureData(atlas, dbar, phi_c)


def sub_structure(structure: MeromorphicStructureData, size: int) -> MeromorphicStructureData:
    """Restriction to the span of the first `size` frame vectors, assumed invariant."""
    block = slice(0, size)
    return MeromorphicStructureData(structure.atlas,
                                    structure.dbar[..., block, block],
                                    structure.phi_c[..., block, block])


class BundleMetric:
    """
    A Hermitian metric H on the bundle, positive definite at every active point.

    Attributes:
        atlas (SurfaceChartAtlas): Atlas the metric lives on.
        values (np.ndarray): H, shape (2, nx, nx, nt, n, n); inert points hold the identity.
    """

    def __init__(self, atlas: SurfaceChartAtlas, values: np.ndarray, check: bool = True) -> None:
        values = atlas.check_field(np.asarray(values, dtype=complex))
        values = 0.5 * (values + dagger(values))
        rank = values.shape[-1]
        values = np.array(values, copy=True)
        values[~atlas.active] = np.eye(rank)
        self.atlas = atlas
        self.values = values
        self.rank = rank
        self.eigenvalues, self.eigenvectors = np.linalg.eigh(values)
        if check and np.any(self.eigenvalues <= POSITIVITY_TOLERANCE):
            raise FlowError(
                f"Bundle metric is not positive definite: smallest eigenvalue {self.eigenvalues.min():.3e}."
            )

    def _function(self, transform) -> np.ndarray:
        return (self.eigenvectors * transform(self.eigenvalues)[..., None, :]) @ dagger(self.eigenvectors)

    def sqrt(self) -> np.ndarray:
        return self._function(np.sqrt)

    def inverse_sqrt(self) -> np.ndarray:
        return self._function(lambda values: 1.0 / np.sqrt(values))

    def log(self) -> np.ndarray:
        return self._function(np.log)

    def log_det(self) -> np.ndarray:
        """log det H per point, shape (2, nx, nx, nt)."""
        out = np.sum(np.log(self.eigenvalues), axis=-1)
        out[~self.atlas.active] = 0
        return out


def identity_metric(atlas: SurfaceChartAtlas, rank: int) -> BundleMetric:
    return BundleMetric(atlas, np.broadcast_to(identity_field(rank), atlas.grid_shape + (1, rank, rank)))


def metric_from_log(atlas: SurfaceChartAtlas, hermitian: np.ndarray) -> BundleMetric:
    """H = exp(X) for a Hermitian field X."""
    hermitian = 0.5 * (hermitian + dagger(hermitian))
    eigenvalues, vectors = np.linalg.eigh(hermitian)
    values = (vectors * np.exp(eigenvalues)[..., None, :]) @ dagger(vectors)
    return BundleMetric(atlas, values)


def random_metric(atlas: SurfaceChartAtlas, rank: int, seed: int = 0, scale: float = 0.5,
                  max_degree: int = 2, fiber_invariant: bool = False) -> BundleMetric:
    generator = FieldGenerator(atlas, seed=seed, max_degree=max_degree)
    return metric_from_log(atlas, scale * generator.generate('hermitian', rank, fiber_invariant))


def _frame_change(atlas: SurfaceChartAtlas, metric: BundleMetric, direction: str) -> np.ndarray:
    """H^(1/2) v(H^(-1/2)); for line bundles the exact form -1/2 v(log H) is used."""
    if metric.rank == 1:
        return -0.5 * frame_apply(atlas, metric.log(), direction)
    return metric.sqrt() @ frame_apply(atlas, metric.inverse_sqrt(), direction)


def chern_connection(atlas: SurfaceChartAtlas,
                     structure: MeromorphicStructureData,
                     metric: Optional[BundleMetric] = None) -> UnitaryConnection:
    """
    The H-unitary connection whose (0, 1) part and complexified fiber derivative are the
    structure's operators, written in the H-orthonormal frame e = H^(-1/2) e_0.

    In that frame B' = H^(1/2) B H^(-1/2) + H^(1/2) v_zbar(H^(-1/2)) and P' likewise with xi;
    then A_vzbar = B', A_vz = -B'^+, A_xi = (P' - P'^+) / 2 and phi = i (P' + P'^+) / 2.
    """
    metric = metric or identity_metric(atlas, structure.rank)
    if metric.rank != structure.rank:
        raise FlowError(f"Metric rank {metric.rank} does not match structure rank {structure.rank}.")
    root, inverse_root = metric.sqrt(), metric.inverse_sqrt()

    dbar = root @ structure.dbar @ inverse_root + _frame_change(atlas, metric, 'v_zbar')
    phi_c = root @ structure.phi_c @ inverse_root + _frame_change(atlas, metric, 'xi')
    dbar = atlas.synchronize(dbar, 'zbar')
    phi_c = atlas.synchronize(phi_c)
    return UnitaryConnection(
        atlas,
        a_vz=-dagger(dbar),
        a_vzbar=dbar,
        a_xi=0.5 * (phi_c - dagger(phi_c)),
        higgs=0.5j * (phi_c + dagger(phi_c)),
        singularities=structure.singularities,
    )
