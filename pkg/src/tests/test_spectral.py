import unittest

import numpy as np

from triples import LineCocycle, RationalFunction, RationalMatrix, direct_sum, picard_twist, rank_one_solution
from spectral import (
    SpectralError,
    branch_points,
    char_poly,
    eigenline_samples,
    lift_cocycle,
    monodromy_irreducibility,
    pushforward_reconstruct,
    squarefree_check,
    torsor_difference,
)

from data_fields import TRANSPOSITION, THREE_CYCLE, SPLIT_PAIR, UPPER_TRIANGULAR


class TestCurve(unittest.TestCase):

    def test_coefficients(self):
        curve = char_poly(TRANSPOSITION)
        self.assertEqual(curve.degree, 2)
        self.assertEqual(curve.coefficients, [RationalFunction.coerce('-z'), 0, 1])
        self.assertEqual(char_poly(THREE_CYCLE).coefficients, [RationalFunction.coerce('z'), 0, 0, -1])

    def test_triangular_matrix(self):
        curve = char_poly(UPPER_TRIANGULAR)
        self.assertEqual(curve.coefficients, char_poly(SPLIT_PAIR).coefficients)
        self.assertEqual(curve.coefficients[0], RationalFunction.coerce('z*(z+1)'))

    def test_squarefree(self):
        self.assertTrue(squarefree_check(char_poly(TRANSPOSITION)))
        self.assertTrue(squarefree_check(char_poly(SPLIT_PAIR)))
        self.assertFalse(squarefree_check(char_poly(RationalMatrix.scalar('z', 2))))
        self.assertTrue(squarefree_check(char_poly(RationalMatrix([['z+5']]))))

    def test_branch_points(self):
        curve = char_poly(TRANSPOSITION)
        self.assertEqual(curve.discriminant.order_at(0), 1)
        np.testing.assert_allclose(branch_points(curve), [0.0], atol=1e-12)
        self.assertEqual(branch_points(char_poly(SPLIT_PAIR)).size, 0)

    def test_poles_are_branch_points(self):
        points = branch_points(char_poly(RationalMatrix([[0, 1], ['1/(z-2)', 0]])))
        self.assertTrue(np.any(np.abs(points - 2.0) < 1e-9))

    def test_reducible_curve_has_no_branch_points(self):
        with self.assertRaises(SpectralError):
            branch_points(char_poly(RationalMatrix.identity(2)))


class TestMonodromy(unittest.TestCase):

    def test_transposition(self):
        certificate = monodromy_irreducibility(char_poly(TRANSPOSITION), 1.0)
        self.assertEqual(certificate.permutations, [(1, 0)])
        self.assertTrue(certificate.transitive)

    def test_three_cycle(self):
        curve = char_poly(THREE_CYCLE)
        certificate = monodromy_irreducibility(curve, 1.0)
        self.assertEqual(len(certificate.permutations), 1)
        permutation = certificate.permutations[0]
        self.assertEqual(sorted(permutation), [0, 1, 2])
        self.assertTrue(all(permutation[j] != j for j in range(3)))
        self.assertTrue(curve.irreducible)
        self.assertIn('certificate', curve.to_dict())

    def test_split_curve(self):
        curve = char_poly(SPLIT_PAIR)
        certificate = monodromy_irreducibility(curve, 0.5j)
        self.assertEqual(certificate.orbits, [[0], [1]])
        self.assertFalse(curve.irreducible)

    def test_needs_squarefree_curve(self):
        with self.assertRaises(SpectralError):
            monodromy_irreducibility(char_poly(RationalMatrix.scalar('z', 2)), 1.0)

    def test_base_point_on_branch_point(self):
        with self.assertRaises(SpectralError):
            monodromy_irreducibility(char_poly(TRANSPOSITION), 0.0)


class TestEigenlines(unittest.TestCase):

    def test_normalized_eigenlines(self):
        samples = eigenline_samples(TRANSPOSITION, [4.0])
        self.assertEqual(len(samples), 2)
        for sample in samples:
            self.assertAlmostEqual(sample.vector[0], 1.0, places=12)
            self.assertAlmostEqual(sample.vector[1], sample.eta, places=10)
        self.assertAlmostEqual(samples[0].eta, -2.0, places=10)

    def test_leading_zero_entry(self):
        samples = eigenline_samples(UPPER_TRIANGULAR, [0.5])
        np.testing.assert_allclose(samples[0].vector, [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(samples[1].vector, [1.0, 1.0], atol=1e-12)

    def test_reconstruction(self):
        rng = np.random.default_rng(4)
        points = 3 * (rng.standard_normal(5) + 1j * rng.standard_normal(5))
        for matrix in (TRANSPOSITION, THREE_CYCLE, UPPER_TRIANGULAR):
            for z in points:
                rebuilt = pushforward_reconstruct(eigenline_samples(matrix, [z]))
                error = np.max(np.abs(rebuilt - matrix(np.array([z]))[0]))
                self.assertLess(error, 1e-8)

    def test_discriminant_points_are_refused(self):
        with self.assertRaises(SpectralError):
            eigenline_samples(TRANSPOSITION, [0.0])

    def test_reconstruction_needs_one_fiber(self):
        with self.assertRaises(SpectralError):
            pushforward_reconstruct(eigenline_samples(TRANSPOSITION, [1.0, 2.0]))
        with self.assertRaises(SpectralError):
            pushforward_reconstruct([])


class TestLift(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        first, second = rank_one_solution('z+5', 1), rank_one_solution('z+7', 1)
        cls.plain = direct_sum([first, second])
        cls.twisted = direct_sum([first, picard_twist(second, LineCocycle.degree(second.cover, 1))])

    def test_lift_is_valid(self):
        for triple in (self.plain, self.twisted):
            lift = lift_cocycle(triple, samples=32, seed=2)
            self.assertTrue(lift.valid, lift.violations)
            self.assertTrue(lift.rows())

    def test_pair_scalars_multiply_to_eta(self):
        lift = lift_cocycle(self.plain, samples=16, seed=3)
        data, back = lift.pairs[(0, 1)], lift.pairs[(1, 0)]
        np.testing.assert_allclose(data['scalars'] * back['scalars'], data['eta'], rtol=1e-9)

    def test_torsor_difference(self):
        difference = torsor_difference(lift_cocycle(self.plain, samples=32, seed=5),
                                       lift_cocycle(self.twisted, samples=32, seed=5))
        self.assertTrue(difference.valid, difference.to_dict())
        np.testing.assert_allclose(difference.ratios[(0, 1)][:, 0], 1.0, rtol=1e-9)

    def test_torsor_difference_needs_matching_samples(self):
        with self.assertRaises(SpectralError):
            torsor_difference(lift_cocycle(self.plain, samples=8, seed=1),
                              lift_cocycle(self.plain, samples=8, seed=2))


if __name__ == '__main__':
    unittest.main()
