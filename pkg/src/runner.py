import logging
from functools import partial
from typing import Callable, Dict, List, Optional

import numpy as np

import flow
import gauge
import geometry
import spectral
import triples
from config import RunConfig, resolve_path
from flow import (
    FlowError,
    chern_connection,
    diagonal_structure,
    identity_metric,
    poisson_oracle,
    random_metric,
    run_flow,
    structure_from_connection,
)
from gauge import (
    DiracSingularitySpec,
    GaugeError,
    bump_shift_constant,
    contact_connection,
    curvature,
    degree,
    dirac_local_model,
    gauge_transform,
    random_connection,
    random_unitary_gauge,
    verify_dirac_model,
)
from geometry import (
    FieldGenerator,
    GeometryError,
    build_atlas,
    commutator_residuals,
    convergence_ratio,
    field_rows,
    gauduchon_residual,
    integrate,
    integration_by_parts_defect,
    owned_sup,
    volume,
)
from report_handlers import CommandResult, LocalReportWriter, emit_report
from spectral import (
    SpectralError,
    branch_points,
    char_poly,
    eigenline_samples,
    lift_cocycle,
    monodromy_irreducibility,
    pushforward_reconstruct,
    squarefree_check,
)
from triples import (
    LineCocycle,
    RationalFunction,
    RationalMatrix,
    SingularPoint,
    TripleError,
    abel_check,
    he_constant_shift,
    load_cocycle,
    load_document,
    load_triple,
    picard_twist,
    rank_one_solution,
    triple_to_dict,
    validate_triple,
)

logger = logging.getLogger(__name__)


EXIT_SUCCESS = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

COMPUTATION_ERRORS = (GeometryError, GaugeError, FlowError, TripleError, SpectralError)

CONVERGENCE_RATIO = 3.5
CONVERGENCE_FLOOR = 1e-9
PARTS_TOLERANCE = 1e-2
DIRAC_TOLERANCE = 1e-4
DEGREE_TOLERANCE = 5e-3
GAUGE_TOLERANCE = 2e-2
RECONSTRUCTION_TOLERANCE = 1e-8
BRANCH_CLEARANCE = 0.1


def versions() -> Dict[str, str]:
    return {module.__name__: module.__version__ for module in (geometry, gauge, flow, triples, spectral)}


def _atlas(config: RunConfig, level: int = 0):
    block = config.geometry
    return build_atlas(block.k, block.n_z * 2 ** level, block.n_theta * 2 ** level)


def _singularities(config: RunConfig) -> List[DiracSingularitySpec]:
    return [DiracSingularitySpec(s.chart, complex(*s.z), s.theta, tuple(s.weights), s.radius)
            for s in config.singularities]


def _connection(config: RunConfig, atlas):
    block = config.connection
    singularities = _singularities(config)
    if block is None or block.kind == 'contact':
        constant = 0.5 if block is None else block.constant
        rank = 1 if block is None else block.rank
        return contact_connection(atlas, constant, rank, singularities), 2 * rank * constant
    conn = random_connection(atlas, block.rank, seed=config.seed, terms=block.terms, scale=block.scale,
                             max_degree=block.max_degree)
    return conn, None


def _triple(config: RunConfig, result: CommandResult):
    block = config.triple
    if block.path:
        path = resolve_path(block.path)
        result.inputs.append(path)
        return load_triple(path)
    if block.G is None:
        raise TripleError("The triple block needs either a path or a rank-one G.")
    return rank_one_solution(RationalFunction.from_dict(block.G), block.k, complex(*block.base_point))


def _identity_checks(result: CommandResult, report, prefix: str = '') -> None:
    for item in report.checks:
        result.check(prefix + item.name, item.residual, item.passed)


# Commands


def run_geometry_check(config: RunConfig, result: CommandResult) -> CommandResult:
    rows, gauduchon, commutators = [], [], []
    for level in range(config.geometry.refinements + 1):
        atlas = _atlas(config, level)
        generator = FieldGenerator(atlas, seed=config.seed)
        residual = gauduchon_residual(atlas)
        brackets = commutator_residuals(atlas, generator.generate('scalar'))
        defect = integration_by_parts_defect(atlas, generator.generate('section'))
        gauduchon.append(residual)
        commutators.append(brackets['v_z_v_zbar'])
        rows.append({'n_z': atlas.n_z, 'n_theta': atlas.n_theta, 'h': atlas.h, 'gauduchon': residual,
                     'commutator_v_z_v_zbar': brackets['v_z_v_zbar'], 'commutator_xi_v_z': brackets['xi_v_z'],
                     'integration_by_parts': defect})
        logger.info("Level %d (n_z=%d): gauduchon %.3e", level, atlas.n_z, residual)

    parts = [row['integration_by_parts'] for row in rows]
    sweeps = {'gauduchon': gauduchon, 'commutator v_z v_zbar': commutators}
    result.results = {'levels': rows, 'gauduchon_ratios': convergence_ratio(gauduchon),
                      'commutator_ratios': convergence_ratio(commutators),
                      'integration_by_parts_ratios': convergence_ratio(parts)}
    result.tables['refinement'] = rows
    result.tables['density_mu'] = field_rows(atlas, atlas.density_mu)
    for name, errors in sweeps.items():
        for level, ratio in enumerate(convergence_ratio(errors)):
            converged = ratio >= CONVERGENCE_RATIO or errors[level + 1] < CONVERGENCE_FLOOR
            result.check(f"{name} ratio level {level}->{level + 1}", ratio, converged)
    # a coarse sweep that misses the tolerance still passes when it converges at second order
    parts_ratios = convergence_ratio(parts)
    result.check('integration by parts defect', parts[-1],
                 parts[-1] < PARTS_TOLERANCE or (bool(parts_ratios) and parts_ratios[-1] >= CONVERGENCE_RATIO))
    return result


def run_dirac_verify(config: RunConfig, result: CommandResult) -> CommandResult:
    atlas = _atlas(config)
    specs = _singularities(config)
    if not specs:
        raise GaugeError("dirac-verify needs at least one singularity.")
    rows = []
    for index, spec in enumerate(specs):
        others = specs[:index] + specs[index + 1:]
        model = dirac_local_model(atlas, spec.weights, (spec.chart, spec.center, spec.theta), spec.radius, others)
        report = verify_dirac_model(model, seed=config.seed + index)
        rows.append(dict(report, singularity=index))
        for name, value in sorted(report.items()):
            result.check(f"singularity {index} {name}", value, value < DIRAC_TOLERANCE)
    result.results['models'] = rows
    result.tables['dirac'] = rows
    return result


def run_degree(config: RunConfig, result: CommandResult) -> CommandResult:
    atlas = _atlas(config)
    conn, expected = _connection(config, atlas)
    value = degree(atlas, conn)
    result.results.update({'degree': value, 'expected': expected, 'volume': volume(atlas), 'rank': conn.rank})
    f_sigma = curvature(atlas, conn).f_sigma
    result.tables['trace_f_sigma'] = field_rows(atlas, np.trace(f_sigma, axis1=-2, axis2=-1))
    if expected is not None:
        result.check('degree matches 2nC', value,
                     abs(value - expected) <= DEGREE_TOLERANCE * max(1.0, abs(expected)))
    else:
        gauged = degree(atlas, gauge_transform(conn, random_unitary_gauge(atlas, conn.rank, config.seed + 1)))
        result.results['gauged_degree'] = gauged
        result.check('degree invariant under unitary gauge', gauged - value,
                     abs(gauged - value) <= GAUGE_TOLERANCE * max(1.0, abs(value)))

    metrics = getattr(config.connection, 'metrics', 0) or 0
    if metrics:
        structure = structure_from_connection(conn)
        degrees = [degree(atlas, chern_connection(atlas, structure, random_metric(atlas, conn.rank, config.seed + i)))
                   for i in range(metrics)]
        spread = max(degrees) - min(degrees)
        result.results['metric_degrees'] = degrees
        result.tables['metric_degrees'] = [{'metric': i, 'degree': d} for i, d in enumerate(degrees)]
        result.check('degree independent of the metric', spread,
                     spread <= DEGREE_TOLERANCE * max(1.0, abs(float(np.mean(degrees)))))
    return result


def run_flow_command(config: RunConfig, result: CommandResult) -> CommandResult:
    block = config.flow
    atlas = _atlas(config)
    structure = diagonal_structure(atlas, block.constants)
    summaries = []
    for start in range(block.starts):
        metric = (random_metric(atlas, structure.rank, config.seed + start, block.metric_scale)
                  if block.metric_scale > 0 else identity_metric(atlas, structure.rank))
        outcome = run_flow(atlas, structure, metric, tol=block.tol, max_iter=block.max_iter,
                           step_size=block.dt0, scheme=block.scheme,
                           on_step=partial(result.stream, f"flow_{start}"))
        history = outcome.state.history
        summary = dict(outcome.summary(), start=start)
        result.tables[f"residual_history_{start}"] = history
        result.documents[f"flow_{start}_connection"] = chern_connection(atlas, structure, outcome.state.metric).to_dict()
        result.check(f"start {start} converged", outcome.state.residual, outcome.verdict == 'converged')
        residuals = [record['residual'] for record in history]
        summary['max_residual_increase'] = max((b - a for a, b in zip(residuals, residuals[1:])), default=0.0)

        if structure.rank == 1 and not structure.singularities:
            log_h = outcome.state.metric.log()[..., 0, 0].real
            mean = integrate(atlas, log_h).real / volume(atlas)
            exact = poisson_oracle(atlas, structure, mean)[..., 0, 0]
            error = owned_sup(atlas, log_h - exact)
            summary['oracle_error'] = error
            result.check(f"start {start} matches the Poisson solution", error, error < block.oracle_tolerance)
        summaries.append(summary)
    result.results['runs'] = summaries
    return result


def run_triple_validate(config: RunConfig, result: CommandResult) -> CommandResult:
    triple = _triple(config, result)
    report = validate_triple(triple, samples=config.triple.samples, seed=config.seed)
    result.results['validation'] = report.to_dict()
    result.tables['identities'] = report.to_dict()['checks']
    _identity_checks(result, report)
    if triple.singularities:
        verdict = abel_check(triple)
        result.results['abel'] = verdict.to_dict()
        result.check('divisor of det G matches the singularities', verdict.problems, verdict.passed)
    return result


def run_triple_rank1(config: RunConfig, result: CommandResult) -> CommandResult:
    block = config.triple
    if block.G is None:
        raise TripleError("triple-rank1 needs triple.G.")
    triple = rank_one_solution(RationalFunction.from_dict(block.G), block.k, complex(*block.base_point))
    report = validate_triple(triple, samples=block.samples, seed=config.seed)
    result.results.update({'triple': triple_to_dict(triple), 'validation': report.to_dict()})
    result.tables['identities'] = report.to_dict()['checks']
    _identity_checks(result, report)
    return result


def run_picard_twist(config: RunConfig, result: CommandResult) -> CommandResult:
    block = config.triple
    triple = _triple(config, result)
    if block.cocycle_path:
        path = resolve_path(block.cocycle_path)
        result.inputs.append(path)
        cocycle = load_cocycle(path, triple.cover)
    else:
        cocycle = LineCocycle.degree(triple.cover, block.cocycle_degree)
    twisted = picard_twist(triple, cocycle)
    report = validate_triple(twisted, samples=block.samples, seed=config.seed)
    _identity_checks(result, report, 'twisted: ')
    result.check('monodromy unchanged', None, twisted.monodromy == triple.monodromy)

    restored = picard_twist(twisted, cocycle.inverse())
    if triple.is_exact:
        difference = 0.0 if restored.transitions == triple.transitions else float('inf')
    else:
        rng = np.random.default_rng(config.seed)
        difference = 0.0
        for pair in triple.cover.overlap_pairs:
            points = triple.cover.sample(triple.cover.pair_window(*pair), 32, rng)
            difference = max(difference, float(np.max(np.abs(restored.rho(*pair)(points) - triple.rho(*pair)(points)))))
    result.check('inverse twist restores the triple', difference, difference <= 1e-12)
    result.results.update({'validation': report.to_dict(), 'cocycle': cocycle.to_dict()})
    if twisted.is_exact or twisted.descriptor is not None:
        result.results['triple'] = triple_to_dict(twisted)
    return result


def run_shift_c(config: RunConfig, result: CommandResult) -> CommandResult:
    block = config.shift
    atlas = None
    volume_x = block.volume
    if volume_x is None or block.numeric:
        atlas = _atlas(config)
        volume_x = volume_x or volume(atlas)
    points = [SingularPoint(0j, (0.0,), tuple(weights)) for weights in block.weights]
    shift = he_constant_shift(points, block.t, volume_x, rank=len(block.weights[0]))
    result.results.update({'delta_C': shift, 'volume': volume_x})
    result.check('shift is finite', shift, bool(np.isfinite(shift)))
    if block.numeric:
        numeric = bump_shift_constant(atlas, block.weights, block.t, volume_x)
        relative = abs(numeric - shift) / max(abs(shift), 1e-12)
        result.results['numeric_delta_C'] = numeric
        result.check('bump-metric shift matches', relative, relative <= block.numeric_tolerance)
    return result


def _spectral_matrix(config: RunConfig, result: CommandResult) -> RationalMatrix:
    block = config.spectral
    if block.matrix is not None:
        return RationalMatrix([[RationalFunction.from_dict(entry) for entry in row] for row in block.matrix])
    if block.path is None:
        raise SpectralError("The spectral block needs a matrix or a path.")
    path = resolve_path(block.path)
    result.inputs.append(path)
    document = load_document(path)
    if 'rows' in document:
        return RationalMatrix.from_dict(document)
    monodromy = load_triple(document).monodromy[0]
    if not isinstance(monodromy, RationalMatrix):
        raise SpectralError("Spectral data needs a rational monodromy.")
    return monodromy


def run_spectral(config: RunConfig, result: CommandResult) -> CommandResult:
    block = config.spectral
    matrix = _spectral_matrix(config, result)
    curve = char_poly(matrix)
    squarefree = squarefree_check(curve)
    result.check('spectral curve is squarefree', squarefree, squarefree)
    if not squarefree:
        result.results['curve'] = curve.to_dict()
        return result

    branches = branch_points(curve)
    certificates = [monodromy_irreducibility(curve, complex(*point)) for point in block.base_points]
    orbit_counts = [len(c.orbits) for c in certificates]
    result.results.update({
        'curve': curve.to_dict(),
        'branch_points': branches,
        'certificates': [c.to_dict() for c in certificates],
    })
    result.tables['branch_points'] = [{'re': p.real, 'im': p.imag} for p in branches]
    result.check('orbit count independent of the base point', orbit_counts, len(set(orbit_counts)) == 1)

    rng = np.random.default_rng(config.seed)
    points: List[complex] = []
    while len(points) < block.points:
        z = complex(*rng.uniform(-2.0, 2.0, 2))
        if branches.size == 0 or np.min(np.abs(branches - z)) > BRANCH_CLEARANCE:
            points.append(z)
    errors, rows = [], []
    for z in points:
        samples = eigenline_samples(matrix, [z])
        reconstructed = pushforward_reconstruct(samples)
        exact = matrix(np.array(z))
        errors.append(float(np.linalg.norm(reconstructed - exact) / max(np.linalg.norm(exact), 1e-300)))
        rows.extend(sample.to_dict() for sample in samples)
    result.tables['eigenlines'] = rows
    result.results['reconstruction_error'] = max(errors)
    result.check('pushforward reconstructs G', max(errors), max(errors) < RECONSTRUCTION_TOLERANCE)
    return result


def run_lift(config: RunConfig, result: CommandResult) -> CommandResult:
    triple = _triple(config, result)
    lift = lift_cocycle(triple, samples=config.spectral.samples, seed=config.seed)
    for check in lift.checks:
        result.check(check.name, check.residual, check.passed)
    result.results['lift'] = lift.to_dict()
    result.tables['lift'] = lift.rows()
    return result


COMMAND_LOOKUP: Dict[str, Callable[[RunConfig, CommandResult], CommandResult]] = {
    'geometry-check': run_geometry_check,
    'dirac-verify': run_dirac_verify,
    'degree': run_degree,
    'flow': run_flow_command,
    'triple-validate': run_triple_validate,
    'triple-rank1': run_triple_rank1,
    'picard-twist': run_picard_twist,
    'shift-C': run_shift_c,
    'spectral': run_spectral,
    'lift': run_lift,
    # Add new subcommands here
}


def run(config: RunConfig, command: Optional[str] = None, output_dir: Optional[str] = None) -> int:
    """
    Run one subcommand and write its report.

    Returns:
        int: 0 when every check passed, 1 on a failed check or a computational error,
            2 for an unknown subcommand.
    """
    command = command or config.command
    if command not in COMMAND_LOOKUP:
        logger.error("Subcommand '%s' is not supported. Choose from: %s", command, ', '.join(COMMAND_LOOKUP))
        return EXIT_CONFIG
    output_dir = output_dir or config.output_dir
    configuration = config.model_dump(mode='json')
    writer = LocalReportWriter(output_dir)
    writer.connect()
    result = CommandResult(command, writer=writer)
    try:
        COMMAND_LOOKUP[command](config, result)
    except COMPUTATION_ERRORS as error:
        logger.error("%s failed: %s", command, error)
        result.results['error'] = f"{type(error).__name__}: {error}"
        result.check('completed', str(error), False)
    path = emit_report(result, output_dir, configuration, versions())
    print(path)
    return EXIT_SUCCESS if result.passed else EXIT_FAILURE
