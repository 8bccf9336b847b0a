import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Dict, List, Optional

import numpy as np

from geometry import SurfaceChartAtlas, ResolventSolver, integrate, pointwise_norm
from gauge import dagger, degree, excised_sup, excision_mask
from gauge.curvature import curvature
from .structure import (
    BundleMetric,
    FlowDiverged,
    FlowError,
    FlowStalled,
    MeromorphicStructureData,
    chern_connection,
    identity_metric,
)

logger = logging.getLogger(__name__)


SCHEMES = ('implicit', 'explicit')
IMPLICIT_STEP = 2.0
UNDERFLOW_HALVINGS = 20
STEP_GROWTH = 2.0
ACCEPT_SLACK = 1e-12
STAGNATION_WINDOW = 50
STAGNATION_RATIO = 1e-6


@dataclass
class FlowState:
    """
    State of the Hermitian-metric heat flow for one fixed structure.

    Attributes:
        structure (MeromorphicStructureData): The structure being flowed.
        metric (BundleMetric): Current metric H.
        constant (float): Hermite-Einstein constant C = deg / (2n), fixed for the run.
        step_size (float): Step size of the next attempt.
        iteration (int): Number of accepted steps.
        residual (float): Hermite-Einstein residual of the current metric.
        history (List[Dict]): One record per accepted step (and the start).
        initial_step (float): Step size the run started with; caps regrowth and sets the underflow threshold.
    """
    structure: MeromorphicStructureData
    metric: BundleMetric
    constant: float
    step_size: float
    iteration: int = 0
    residual: float = float('inf')
    history: List[Dict] = field(default_factory=list)
    velocity: Optional[np.ndarray] = field(default=None, repr=False)
    initial_step: Optional[float] = None


@dataclass
class FlowResult:
    state: FlowState
    verdict: str
    reason: str
    integrability_residual: float

    def summary(self) -> Dict:
        return {
            'verdict': self.verdict,
            'reason': self.reason,
            'iterations': self.state.iteration,
            'residual': self.state.residual,
            'constant': self.state.constant,
            'step_size': self.state.step_size,
            'integrability_residual': self.integrability_residual,
            'det_drift': det_drift(self.state.history),
        }


def hermite_einstein_constant(atlas: SurfaceChartAtlas,
                              structure: MeromorphicStructureData,
                              metric: Optional[BundleMetric] = None) -> float:
    """C = deg / (2n), computed once from the Chern connection of the starting metric."""
    conn = chern_connection(atlas, structure, metric)
    return degree(atlas, conn) / (2 * structure.rank)


def automatic_step(atlas: SurfaceChartAtlas, scheme: str = 'implicit') -> float:
    if scheme not in SCHEMES:
        raise FlowError(f"Flow scheme '{scheme}' is not supported.")
    if scheme == 'implicit':
        return IMPLICIT_STEP
    mu_min = float(np.min(atlas.density_mu[atlas.active]))
    return 1.0 / (1.0 / (2 * mu_min * atlas.h ** 2) + (atlas.n_theta / 2) ** 2 / 4)


def flow_velocity(atlas: SurfaceChartAtlas, structure: MeromorphicStructureData,
                  metric: BundleMetric, constant: float):
    """
    Returns (residual, V) with V = i (F_Sigma - F_alpha / 2 + i C) in the H-unitary frame.
    V is Hermitian and vanishes on Hermite-Einstein metrics; it is zero inside excision balls.
    """
    conn = chern_connection(atlas, structure, metric)
    defect = curvature(atlas, conn).hermite_einstein(constant)
    residual = excised_sup(atlas, pointwise_norm(defect), structure.singularities)
    velocity = 1j * defect
    velocity = 0.5 * (velocity + dagger(velocity))
    return residual, _pin(atlas, structure, velocity)


def _pin(atlas: SurfaceChartAtlas, structure: MeromorphicStructureData, velocity: np.ndarray) -> np.ndarray:
    """Zero a velocity inside the excision balls, holding H at its starting value there."""
    if not structure.singularities:
        return velocity
    pinned = excision_mask(atlas, structure.singularities)
    velocity = np.array(np.broadcast_to(velocity, atlas.grid_shape + (atlas.n_theta,) + velocity.shape[4:]))
    velocity[pinned] = 0
    return velocity


@lru_cache(maxsize=8)
def _resolvent(atlas: SurfaceChartAtlas, scale: float) -> ResolventSolver:
    return ResolventSolver(atlas, scale)


def _advance(atlas: SurfaceChartAtlas, metric: BundleMetric, velocity: np.ndarray, step: float) -> BundleMetric:
    """H^(1/2) exp(-dt V) H^(1/2), re-Hermitized and synchronized."""
    velocity = 0.5 * (velocity + dagger(velocity))
    eigenvalues, vectors = np.linalg.eigh(velocity)
    flow = (vectors * np.exp(-step * eigenvalues)[..., None, :]) @ dagger(vectors)
    root = metric.sqrt()
    values = root @ flow @ root
    values = 0.5 * (values + dagger(values))
    return BundleMetric(atlas, atlas.synchronize(values))


def log_det_integral(atlas: SurfaceChartAtlas, metric: BundleMetric) -> float:
    return float(integrate(atlas, metric.log_det()).real)


def _record(atlas: SurfaceChartAtlas, state: FlowState, step: Optional[float] = None) -> Dict:
    return {
        'iteration': state.iteration,
        'residual': state.residual,
        'step_size': state.step_size if step is None else step,
        'log_det': log_det_integral(atlas, state.metric),
    }


def initial_state(atlas: SurfaceChartAtlas,
                  structure: MeromorphicStructureData,
                  metric: Optional[BundleMetric] = None,
                  constant: Optional[float] = None,
                  step_size: Optional[float] = None,
                  scheme: str = 'implicit') -> FlowState:
    metric = metric or identity_metric(atlas, structure.rank)
    if constant is None:
        constant = hermite_einstein_constant(atlas, structure, metric)
    residual, velocity = flow_velocity(atlas, structure, metric, constant)
    step_size = step_size or automatic_step(atlas, scheme)
    state = FlowState(
        structure=structure,
        metric=metric,
        constant=constant,
        step_size=step_size,
        residual=residual,
        velocity=velocity,
        initial_step=step_size,
    )
    state.history.append(_record(atlas, state))
    return state


def flow_step(atlas: SurfaceChartAtlas, state: FlowState, scheme: str = 'implicit',
              min_step: Optional[float] = None) -> FlowState:
    """
    One accepted step of H <- H^(1/2) exp(-dt V) H^(1/2).

    The step is halved until the residual does not increase. A step accepted on its
    first attempt lets the next one grow back towards the initial step. The history
    list is shared with the returned state and appended to.

    Raises:
        FlowStalled: the step size fell below `min_step` with finite residuals.
        FlowDiverged: every attempt produced a non-finite residual.
    """
    if scheme not in SCHEMES:
        raise FlowError(f"Flow scheme '{scheme}' is not supported.")
    if state.velocity is None:
        state.residual, state.velocity = flow_velocity(atlas, state.structure, state.metric, state.constant)
    initial_step = state.initial_step or state.step_size
    min_step = min_step or initial_step / 2 ** UNDERFLOW_HALVINGS
    step = state.step_size
    attempts, finite_attempt = 0, False

    while step >= min_step:
        attempts += 1
        direction = state.velocity
        if scheme == 'implicit':
            direction = _pin(atlas, state.structure, _resolvent(atlas, 0.5 * step).apply(direction))
        try:
            candidate = _advance(atlas, state.metric, direction, step)
            residual, velocity = flow_velocity(atlas, state.structure, candidate, state.constant)
        except (np.linalg.LinAlgError, FlowError) as error:
            logger.debug("Step %.3e rejected: %s", step, error)
            residual = float('nan')

        if np.isfinite(residual):
            finite_attempt = True
            if residual <= state.residual + ACCEPT_SLACK * max(1.0, state.residual):
                next_step = min(initial_step, STEP_GROWTH * step) if step == state.step_size else step
                accepted = replace(state,
                                   metric=candidate,
                                   step_size=next_step,
                                   iteration=state.iteration + 1,
                                   residual=residual,
                                   velocity=velocity,
                                   initial_step=initial_step)
                accepted.history.append(_record(atlas, accepted, step))
                logger.debug("Step %d accepted: dt=%.3e residual=%.3e", accepted.iteration, step, residual)
                return accepted
        step /= 2

    if attempts and not finite_attempt:
        raise FlowDiverged(f"Residual became non-finite at iteration {state.iteration}.")
    raise FlowStalled(
        f"Step size fell below {min_step:.3e} at iteration {state.iteration} with residual {state.residual:.3e}."
    )


def _stagnated(history: List[Dict], window: int, ratio: float) -> bool:
    if window <= 0 or len(history) <= window:
        return False
    before = history[-window - 1]['residual']
    after = history[-1]['residual']
    return before - after <= ratio * before


def run_flow(atlas: SurfaceChartAtlas,
             structure: MeromorphicStructureData,
             metric: Optional[BundleMetric] = None,
             tol: float = 1e-5,
             max_iter: int = 10000,
             step_size: Optional[float] = None,
             scheme: str = 'implicit',
             constant: Optional[float] = None,
             stagnation_window: int = STAGNATION_WINDOW,
             on_step: Optional[Callable[[Dict], None]] = None) -> FlowResult:
    """
    Run the flow until the Hermite-Einstein residual drops below `tol`.

    Verdicts: 'converged', 'stalled' (step underflow, iteration budget or no progress
    over `stagnation_window` accepted steps) and 'diverged' (non-finite residual).
    A non-converged run is evidence only, never a certificate of instability.
    """
    integrability = structure.integrability_residual
    if integrability > max(tol, 1e-8):
        logger.warning("Structure is not integrable (residual %.3e); the flow will level off.", integrability)

    state = initial_state(atlas, structure, metric, constant, step_size, scheme)
    logger.info("Flow start: rank=%d C=%.6f residual=%.3e dt=%.3e scheme=%s",
                structure.rank, state.constant, state.residual, state.step_size, scheme)
    if on_step:
        on_step(state.history[-1])

    verdict, reason = 'stalled', 'max_iter'
    while True:
        if state.residual < tol:
            verdict, reason = 'converged', 'tolerance'
            break
        if state.iteration >= max_iter:
            break
        if _stagnated(state.history, stagnation_window, STAGNATION_RATIO):
            reason = 'stagnation'
            break
        try:
            state = flow_step(atlas, state, scheme)
        except FlowStalled as error:
            logger.info("%s", error)
            reason = 'step_underflow'
            break
        except FlowDiverged as error:
            logger.info("%s", error)
            verdict, reason = 'diverged', 'non_finite'
            break
        if on_step:
            on_step(state.history[-1])
        if state.iteration % 50 == 0:
            logger.info("Flow iteration %d: residual=%.3e dt=%.3e", state.iteration, state.residual, state.step_size)

    logger.info("Flow %s (%s) after %d steps: residual=%.3e", verdict, reason, state.iteration, state.residual)
    return FlowResult(state=state, verdict=verdict, reason=reason, integrability_residual=integrability)


def det_drift(history: List[Dict]) -> float:
    """Largest change of the integral of tr log H over a run."""
    if not history:
        return 0.0
    start = history[0]['log_det']
    return float(max(abs(record['log_det'] - start) for record in history))
