import unittest

import numpy as np

from geometry import build_atlas, integrate, owned_sup, volume
from gauge import (
    DiracSingularitySpec,
    contact_connection,
    degree,
    dolbeault_residual,
    gauge_transform,
    random_unitary_gauge,
    trivial_connection,
)
from flow import (
    FlowError,
    FlowStalled,
    BundleMetric,
    chern_connection,
    contact_structure,
    det_drift,
    diagonal_structure,
    flow_step,
    identity_metric,
    initial_state,
    isomorphism_check,
    poisson_oracle,
    random_metric,
    run_flow,
    structure_from_connection,
    trivial_structure,
)


class TestChernConnection(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.atlas = build_atlas(1, 16, 8)

    def test_identity_metric_on_trivial_structure(self):
        conn = chern_connection(self.atlas, trivial_structure(self.atlas, 2))
        for name, value in conn.components().items():
            self.assertEqual(np.max(np.abs(value)), 0.0, name)

    def test_round_trip_through_structure(self):
        conn = contact_connection(self.atlas, 0.5, 2)
        again = chern_connection(self.atlas, structure_from_connection(conn), identity_metric(self.atlas, 2))
        self.assertLess(np.max(np.abs(again.a_xi - conn.a_xi)), 1e-12)

    def test_dolbeault_residual_is_preserved(self):
        structure = contact_structure(self.atlas, 0.5)
        conn = chern_connection(self.atlas, structure, random_metric(self.atlas, 1, seed=3))
        self.assertLess(dolbeault_residual(self.atlas, conn), 1e-8)

    def test_degree_is_independent_of_the_metric(self):
        structure = contact_structure(self.atlas, 0.5)
        reference = degree(self.atlas, chern_connection(self.atlas, structure))
        for seed in range(3):
            conn = chern_connection(self.atlas, structure, random_metric(self.atlas, 1, seed=seed))
            self.assertAlmostEqual(degree(self.atlas, conn), reference, delta=1e-2)

    def test_metric_must_be_positive(self):
        values = -np.ones(self.atlas.grid_shape + (1, 1, 1))
        with self.assertRaises(FlowError):
            BundleMetric(self.atlas, values)


class TestFlow(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.atlas = build_atlas(1, 16, 8)

    def test_hermite_einstein_start_is_fixed(self):
        outcome = run_flow(self.atlas, contact_structure(self.atlas, 0.5), tol=1e-8)
        self.assertEqual(outcome.verdict, 'converged')
        self.assertEqual(outcome.state.iteration, 0)
        self.assertAlmostEqual(outcome.state.constant, 0.5, places=6)

    def test_first_step_decreases_the_residual(self):
        structure = contact_structure(self.atlas, 0.0)
        state = initial_state(self.atlas, structure, random_metric(self.atlas, 1, seed=1))
        stepped = flow_step(self.atlas, state)
        self.assertLess(stepped.residual, state.residual)
        self.assertEqual(stepped.iteration, 1)
        self.assertEqual(len(stepped.history), 2)

    def test_history_is_shared_and_the_step_regrows(self):
        structure = contact_structure(self.atlas, 0.0)
        state = initial_state(self.atlas, structure, random_metric(self.atlas, 1, seed=1))
        state.step_size = 0.25
        stepped = flow_step(self.atlas, state)
        self.assertIs(stepped.history, state.history)
        self.assertEqual(stepped.history[-1]['step_size'], 0.25)
        self.assertEqual(stepped.step_size, 0.5)
        self.assertEqual(stepped.initial_step, 2.0)

    def test_underflow_threshold_follows_the_initial_step(self):
        structure = contact_structure(self.atlas, 0.0)
        state = initial_state(self.atlas, structure, random_metric(self.atlas, 1, seed=1))
        state.step_size = 1e-7
        with self.assertRaises(FlowStalled):
            flow_step(self.atlas, state)

    def test_rank_one_converges_to_the_poisson_solution(self):
        structure = contact_structure(self.atlas, 0.0)
        outcome = run_flow(self.atlas, structure, random_metric(self.atlas, 1, seed=2), tol=1e-5, max_iter=500)
        self.assertEqual(outcome.verdict, 'converged')
        residuals = [record['residual'] for record in outcome.state.history]
        self.assertTrue(all(b <= a * (1 + 1e-12) for a, b in zip(residuals, residuals[1:])))

        log_h = outcome.state.metric.log()[..., 0, 0].real
        mean = integrate(self.atlas, log_h).real / volume(self.atlas)
        exact = poisson_oracle(self.atlas, structure, mean)[..., 0, 0]
        self.assertLess(owned_sup(self.atlas, log_h - exact), 1e-3)

    def test_rank_two_direct_sum_converges(self):
        structure = diagonal_structure(self.atlas, [0.5, 0.5])
        outcome = run_flow(self.atlas, structure, random_metric(self.atlas, 2, seed=5, scale=0.3),
                           tol=1e-5, max_iter=500)
        self.assertEqual(outcome.verdict, 'converged')
        self.assertLess(det_drift(outcome.state.history), 1e-2)

    def test_destabilizing_structure_does_not_converge(self):
        structure = diagonal_structure(self.atlas, [1.0, -1.0])
        outcome = run_flow(self.atlas, structure, tol=1e-5, max_iter=30)
        self.assertNotEqual(outcome.verdict, 'converged')
        self.assertAlmostEqual(outcome.state.constant, 0.0, places=6)

    def test_unknown_scheme(self):
        with self.assertRaises(FlowError):
            run_flow(self.atlas, trivial_structure(self.atlas), scheme='leapfrog')

    def test_oracle_needs_a_line_bundle(self):
        with self.assertRaises(FlowError):
            poisson_oracle(self.atlas, trivial_structure(self.atlas, 2))


class TestIsomorphism(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.atlas = build_atlas(1, 16, 8)

    def test_same_connection(self):
        conn = contact_connection(self.atlas, 0.5, 2)
        verdict = isomorphism_check(self.atlas, conn, conn)
        self.assertTrue(verdict.isomorphic)
        # identity intertwiner is an exact null vector of the sampled system
        self.assertLess(verdict.singular_ratio, 1e-10)
        self.assertGreaterEqual(verdict.null_dimension, 1)

    def test_gauge_equivalent_connections(self):
        conn = trivial_connection(self.atlas, 2)
        gauged = gauge_transform(conn, random_unitary_gauge(self.atlas, 2, seed=1, scale=0.5))
        self.assertTrue(isomorphism_check(self.atlas, conn, gauged).isomorphic)

    def test_different_weights(self):
        first = contact_connection(self.atlas, 0.5, 1, [DiracSingularitySpec(0, 0.2 + 0j, 0.0, (1,), 0.3)])
        second = contact_connection(self.atlas, 0.5, 1, [DiracSingularitySpec(0, 0.2 + 0j, 0.0, (2,), 0.3)])
        verdict = isomorphism_check(self.atlas, first, second)
        self.assertFalse(verdict.isomorphic)
        self.assertEqual(verdict.reason, 'singularity weights differ')

    def test_constants_must_agree(self):
        with self.assertRaises(FlowError):
            isomorphism_check(self.atlas, contact_connection(self.atlas, 0.5), contact_connection(self.atlas, 1.0))


if __name__ == '__main__':
    unittest.main()
