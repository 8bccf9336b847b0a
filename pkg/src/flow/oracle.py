import logging

import numpy as np
from scipy.sparse import linalg as sparse_linalg

from geometry import SurfaceChartAtlas, ResolventSolver, integrate, laplacian, volume
from gauge.curvature import curvature
from .structure import FlowError, MeromorphicStructureData, chern_connection
from .heat_flow import hermite_einstein_constant

logger = logging.getLogger(__name__)


def poisson_oracle(atlas: SurfaceChartAtlas,
                   structure: MeromorphicStructureData,
                   mean: float = 0.0,
                   rtol: float = 1e-10,
                   maxiter: int = 200) -> np.ndarray:
    """
    Direct solve of the line-bundle Hermite-Einstein equation for u = log H:
        1/2 Delta u = i Lambda F_0 - C,
    where F_0 is the curvature of the structure with H = 1. The discrete Laplacian is the
    one the flow differentiates with, applied matrix-free, so the flow's fixed point and
    this solution agree up to the solver tolerance.

    u is determined up to a constant; it is shifted so its mean over X is `mean`.

    Returns:
        np.ndarray: Real field of shape (2, nx, nx, nt, 1, 1).
    """
    if structure.rank != 1:
        raise FlowError(f"The Poisson oracle needs a line bundle. Received rank {structure.rank}.")
    if structure.singularities:
        raise FlowError("The Poisson oracle does not handle singular structures.")

    constant = hermite_einstein_constant(atlas, structure)
    conn = chern_connection(atlas, structure)
    rhs = np.real(1j * curvature(atlas, conn).hermite_einstein(constant))[..., 0, 0]
    nt = rhs.shape[3]
    size = 2 * atlas.nx * atlas.nx
    interior = np.flatnonzero(atlas.interior.reshape(-1))
    weights = atlas.quadrature_weight.reshape(-1)[interior]
    total = weights.sum() * nt

    def embed(vector: np.ndarray) -> np.ndarray:
        values = np.zeros((size, nt), dtype=complex)
        values[interior] = vector.reshape((interior.size, nt))
        return atlas.synchronize(values.reshape(atlas.grid_shape + (nt, 1, 1)))

    def restrict(field: np.ndarray) -> np.ndarray:
        return field.reshape((size, nt))[interior]

    def weighted_mean(values: np.ndarray) -> float:
        return float(weights @ values.reshape((interior.size, nt)).sum(axis=1)) / total

    def matvec(vector: np.ndarray) -> np.ndarray:
        vector = np.real(vector).ravel()
        out = 0.5 * np.real(restrict(laplacian(atlas, embed(vector)))) + weighted_mean(vector)
        return out.ravel()

    resolvent = ResolventSolver(atlas, 0.5)

    def precondition(vector: np.ndarray) -> np.ndarray:
        return -np.real(restrict(resolvent.apply(embed(np.real(vector).ravel())))).ravel()

    unknowns = interior.size * nt
    operator = sparse_linalg.LinearOperator((unknowns, unknowns), matvec=matvec, dtype=float)
    preconditioner = sparse_linalg.LinearOperator((unknowns, unknowns), matvec=precondition, dtype=float)

    source = restrict(rhs.reshape(atlas.grid_shape + (nt, 1, 1)))
    source = np.real(source) - weighted_mean(np.real(source))
    solution, info = sparse_linalg.gmres(operator, source.ravel(), M=preconditioner,
                                         rtol=rtol, atol=0.0, restart=60, maxiter=maxiter)
    if info != 0:
        raise FlowError(f"Poisson oracle did not converge (GMRES status {info}).")
    logger.debug("Poisson oracle solved %d unknowns", unknowns)

    u = np.real(embed(solution))
    u[atlas.active] += mean - float(integrate(atlas, u).real) / volume(atlas)
    return u
