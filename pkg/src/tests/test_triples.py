import unittest
import os
import tempfile

import numpy as np

from triples import (
    TripleError,
    AnalyticMap,
    RationalFunction,
    RationalMatrix,
    LineCocycle,
    SingularPoint,
    abel_check,
    build_cover,
    direct_sum,
    exact_triple,
    gauge_transform,
    he_constant_shift,
    load_document,
    load_triple,
    picard_twist,
    pole_type,
    rank_one_solution,
    save_document,
    triple_from_dict,
    triple_to_dict,
    validate_triple,
)

from data_fields import ABEL_POINTS, SHIFT_EXAMPLE


def _unimodular(rng: np.random.Generator, size: int) -> RationalMatrix:
    """A product of elementary matrices with polynomial off-diagonal entries."""
    result = RationalMatrix.identity(size)
    for _ in range(3):
        row, column = (int(i) for i in rng.choice(size, 2, replace=False))
        rows = [[1 if i == j else 0 for j in range(size)] for i in range(size)]
        rows[row][column] = f"{int(rng.integers(-3, 4))}*z**{int(rng.integers(0, 3))}"
        result = result @ RationalMatrix(rows)
    return result


class TestRationalFunction(unittest.TestCase):

    def test_canonical_form(self):
        self.assertEqual(RationalFunction.coerce('(2*z+2)/(z+1)'), 2)
        self.assertEqual(RationalFunction.coerce('z+5') * RationalFunction.coerce('1/(z+5)'), 1)

    def test_orders(self):
        f = RationalFunction.coerce('z**2/(z-1)')
        self.assertEqual(f.order_at(0), 2)
        self.assertEqual(f.order_at(1), -1)
        self.assertEqual(f.order_at(2), 0)
        self.assertEqual(f.order_at('inf'), -1)
        self.assertEqual(f.degree, 1)

    def test_evaluation(self):
        f = RationalFunction.coerce('(z+5)/(z-1)')
        np.testing.assert_allclose(f(np.array([0.0, 2.0])), [-5.0, 7.0])
        np.testing.assert_allclose(sorted(f.zeros().real), [-5.0])
        np.testing.assert_allclose(f.poles(), [1.0])

    def test_errors(self):
        with self.assertRaises(TripleError):
            RationalFunction(1, 0)
        with self.assertRaises(TripleError):
            RationalFunction.constant(0).inverse()
        with self.assertRaises(TripleError):
            RationalFunction.coerce('z') ** 0.5
        with self.assertRaises(TripleError):
            RationalFunction.constant(0).order_at(0)

    def test_document(self):
        f = RationalFunction.coerce('(z+1/2)/(z**2+1)')
        self.assertEqual(RationalFunction.from_dict(f.to_dict()), f)


class TestRationalMatrix(unittest.TestCase):

    def test_inverse(self):
        m = RationalMatrix([['z', 1], [0, 'z+1']])
        self.assertEqual(m @ m.inverse(), RationalMatrix.identity(2))
        self.assertEqual(m.det(), RationalFunction.coerce('z*(z+1)'))

    def test_pole_type(self):
        self.assertEqual(pole_type(RationalMatrix.diagonal(['z', 1]), 0), (1, 0))
        self.assertEqual(pole_type(RationalMatrix([['z', 1], [0, 'z']]), 0), (2, 0))
        self.assertEqual(pole_type(RationalMatrix.diagonal(['1/z', 'z']), 0), (1, -1))
        self.assertEqual(pole_type(RationalMatrix([['z']]), 'inf'), (-1,))
        self.assertEqual(pole_type(RationalMatrix.diagonal(['z', 1]), 3), (0, 0))

    def test_pole_type_needs_invertible_matrix(self):
        with self.assertRaises(TripleError):
            pole_type(RationalMatrix([['z', 'z'], [1, 1]]), 0)

    def test_pole_type_off_the_diagonal(self):
        self.assertEqual(pole_type(RationalMatrix([[0, 1], ['z', 0]]), 0), (1, 0))
        self.assertEqual(pole_type(RationalMatrix([['z', 'z'], ['z', '2*z']]), 0), (1, 1))

    def test_pole_type_of_disguised_smith_forms(self):
        # U D V with U, V unimodular has the exponents of D at every point
        rng = np.random.default_rng(11)
        for _ in range(40):
            size = int(rng.integers(2, 4))
            point = int(rng.choice([0, 2]))
            exponents = [int(e) for e in rng.integers(-2, 4, size)]
            units = [int(c) for c in rng.integers(1, 5, size)]
            smith = RationalMatrix.diagonal([f"(z-{point})**({e})*(z+{c})" for e, c in zip(exponents, units)])
            matrix = _unimodular(rng, size) @ smith @ _unimodular(rng, size)
            self.assertEqual(pole_type(matrix, point), tuple(sorted(exponents, reverse=True)), matrix)


class TestCover(unittest.TestCase):

    def test_rejects_trivial_bundle(self):
        with self.assertRaises(TripleError):
            build_cover(0)

    def test_layout(self):
        cover = build_cover(2)
        self.assertEqual(cover.labels, (0, 1, 2, 3))
        self.assertEqual(len(cover.overlap_pairs), 12)
        # one component per sector boundary plus the common centre of the sectors
        self.assertEqual(len(cover.components), 4)

    def test_membership(self):
        cover = build_cover(1)
        self.assertTrue(cover.contains(0, 1.5))
        self.assertFalse(cover.contains(0, 0.5))
        self.assertTrue(cover.contains(1, 0.5j))
        self.assertFalse(cover.contains(2, 0.5j))
        with self.assertRaises(TripleError):
            cover.contains(5, 0.5j)

    def test_twist_table(self):
        table = build_cover(1).twist_table()
        self.assertEqual(len(table), 12)
        self.assertTrue(set(table.values()) <= {0, 1})
        self.assertEqual(table[(0, 1, 2, 0)], 1)
        self.assertEqual(table[(2, 1, 0, 0)], 0)
        self.assertEqual(table[(0, 2, 1, 1)], 1)

    def test_sampled_points_lie_in_the_overlap(self):
        cover = build_cover(2, 0.5 + 0.5j)
        rng = np.random.default_rng(0)
        for component in cover.components:
            points = cover.sample(component, 50, rng)
            self.assertEqual(len(points), 50)
            self.assertTrue(np.all(cover.contains_all(component.labels, points)))


class TestLineCocycle(unittest.TestCase):

    def setUp(self):
        self.cover = build_cover(1)

    def test_degree_cocycles(self):
        for d in (-2, 0, 1, 3):
            self.assertTrue(LineCocycle.degree(self.cover, d).is_valid)
        self.assertEqual(LineCocycle.degree(self.cover, 0), LineCocycle.trivial(self.cover))

    def test_group_structure(self):
        one = LineCocycle.degree(self.cover, 1)
        self.assertEqual(one.compose(LineCocycle.degree(self.cover, 2)), LineCocycle.degree(self.cover, 3))
        self.assertEqual(one.compose(one.inverse()), LineCocycle.trivial(self.cover))

    def test_coboundary(self):
        cocycle = LineCocycle.coboundary(self.cover, {0: 'z+5', 1: 2, 2: 'z-7'})
        self.assertTrue(cocycle.is_valid)

    def test_broken_cocycle(self):
        transitions = dict(LineCocycle.degree(self.cover, 1).transitions)
        transitions[(0, 1)] = RationalFunction.coerce('z**2')
        cocycle = LineCocycle(self.cover, transitions)
        self.assertFalse(cocycle.is_valid)
        self.assertIn("T[0,1] T[1,0] = 1", cocycle.validate())

    def test_missing_transition(self):
        transitions = dict(LineCocycle.trivial(self.cover).transitions)
        del transitions[(1, 2)]
        with self.assertRaises(TripleError):
            LineCocycle(self.cover, transitions)


class TestExactTriples(unittest.TestCase):

    def setUp(self):
        self.cover = build_cover(1)
        self.identity = exact_triple(self.cover, RationalMatrix.identity(2))

    def test_identity_triple_is_valid(self):
        report = validate_triple(self.identity)
        self.assertTrue(report.exact)
        self.assertTrue(report.valid)
        self.assertEqual(report.samples, 0)
        self.assertEqual(report.to_dict()['violations'], [])

    def test_inconsistent_triple_is_reported(self):
        report = validate_triple(exact_triple(self.cover, RationalMatrix.diagonal(['z+5', 1])))
        self.assertFalse(report.valid)
        self.assertTrue(any('G[' in name for name in report.violations))

    def test_picard_twist_keeps_validity(self):
        twisted = picard_twist(self.identity, LineCocycle.degree(self.cover, 1))
        self.assertTrue(validate_triple(twisted).valid)
        self.assertEqual(twisted.rho(0, 1), RationalMatrix.scalar('z', 2))
        self.assertEqual(twisted.monodromy, self.identity.monodromy)

    def test_twist_is_a_group_action(self):
        first, second = LineCocycle.degree(self.cover, 1), LineCocycle.degree(self.cover, -3)
        stepwise = picard_twist(picard_twist(self.identity, first), second)
        at_once = picard_twist(self.identity, first.compose(second))
        self.assertEqual(stepwise.transitions, at_once.transitions)
        restored = picard_twist(picard_twist(self.identity, first), first.inverse())
        self.assertEqual(restored.transitions, self.identity.transitions)

    def test_twist_by_invalid_cocycle(self):
        transitions = dict(LineCocycle.trivial(self.cover).transitions)
        transitions[(1, 0)] = RationalFunction.coerce('z')
        with self.assertRaises(TripleError):
            picard_twist(self.identity, LineCocycle(self.cover, transitions))

    def test_twist_from_another_cover(self):
        with self.assertRaises(TripleError):
            picard_twist(self.identity, LineCocycle.degree(build_cover(2), 1))

    def test_each_scaled_transition_is_reported(self):
        twisted = picard_twist(self.identity, LineCocycle.degree(self.cover, 1))
        for a, b in self.cover.overlap_pairs:
            broken = twisted.replace(transitions={**twisted.transitions, (a, b): twisted.rho(a, b).scale(2)})
            report = validate_triple(broken)
            self.assertFalse(report.valid)
            self.assertIn(f"rho[{a},{b}] rho[{b},{a}] = G[{a}]", report.violations)

    def test_random_line_bundle_pairs(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            cover = build_cover(int(rng.integers(1, 3)))
            identity = exact_triple(cover, RationalMatrix.identity(2))
            functions = {label: f"z+{int(rng.integers(5, 10))}" for label in cover.labels}
            first = LineCocycle.degree(cover, int(rng.integers(-3, 4))).compose(
                LineCocycle.coboundary(cover, functions))
            second = LineCocycle.degree(cover, int(rng.integers(-3, 4)))

            stepwise = picard_twist(picard_twist(identity, first), second)
            self.assertTrue(validate_triple(stepwise).valid)
            self.assertEqual(stepwise.transitions, picard_twist(identity, first.compose(second)).transitions)
            restored = picard_twist(stepwise, first.compose(second).inverse())
            self.assertEqual(restored.transitions, identity.transitions)

    def test_gauge_transform_keeps_validity(self):
        twisted = picard_twist(self.identity, LineCocycle.degree(self.cover, 2))
        gauged = gauge_transform(twisted, {1: RationalMatrix([[1, 'z'], [0, 1]]), 2: RationalMatrix.diagonal([2, 1])})
        self.assertTrue(validate_triple(gauged).valid)

    def test_direct_sum(self):
        line = exact_triple(self.cover, RationalMatrix.identity(1))
        total = direct_sum([line, picard_twist(line, LineCocycle.degree(self.cover, 1))])
        self.assertEqual(total.rank, 2)
        self.assertTrue(validate_triple(total).valid)
        with self.assertRaises(TripleError):
            direct_sum([line, exact_triple(build_cover(2), RationalMatrix.identity(1))])


class TestRankOne(unittest.TestCase):

    def test_solution_is_valid(self):
        for k in (1, 2):
            triple = rank_one_solution('z+5', k)
            report = validate_triple(triple, samples=200, seed=1)
            self.assertFalse(report.exact)
            self.assertTrue(report.valid, report.violations)
            self.assertEqual(triple.determinant_function(), RationalFunction.coerce('z+5'))

    def test_each_scaled_transition_is_reported(self):
        triple = rank_one_solution('z+5', 1)
        for a, b in triple.cover.overlap_pairs:
            rho = triple.rho(a, b)
            scaled = AnalyticMap(lambda z, rho=rho: 2 * rho(z), rho.size, f"2 {rho!r}")
            report = validate_triple(triple.replace(transitions={**triple.transitions, (a, b): scaled}),
                                     samples=50, seed=2)
            self.assertFalse(report.valid)
            self.assertIn(f"rho[{a},{b}] rho[{b},{a}] = G[{a}]", report.violations)

    def test_monodromy_is_g(self):
        triple = rank_one_solution('(z+5)/(z-4)', 1)
        self.assertEqual(triple.monodromy[0], RationalMatrix([['(z+5)/(z-4)']]))

    def test_zero_near_the_base_point(self):
        with self.assertRaises(TripleError):
            rank_one_solution('z', 1)
        with self.assertRaises(TripleError):
            rank_one_solution('z-1', 1)
        with self.assertRaises(TripleError):
            rank_one_solution('1/(z+3/2)', 1)

    def test_twisted_solution(self):
        triple = rank_one_solution('z+5', 1)
        twisted = picard_twist(triple, LineCocycle.degree(triple.cover, 1))
        self.assertTrue(validate_triple(twisted, samples=200).valid)
        self.assertEqual(len(triple_to_dict(twisted)['twists']), 1)

        restored = picard_twist(twisted, LineCocycle.degree(triple.cover, -1))
        z = np.array([1.5 + 0.2j, -1.4 + 0.3j])
        np.testing.assert_allclose(restored.rho(0, 1)(z), triple.rho(0, 1)(z), atol=1e-12)

    def test_direct_sum_of_lines(self):
        total = direct_sum([rank_one_solution('z+5', 1), rank_one_solution('z+7', 1)])
        self.assertTrue(validate_triple(total, samples=200).valid)
        self.assertEqual(total.determinant_function(), RationalFunction.coerce('(z+5)*(z+7)'))


class TestDivisors(unittest.TestCase):

    def test_abel_passes(self):
        triple = exact_triple(build_cover(1), RationalMatrix([['(z-1)/(z+1)']]), singularities=ABEL_POINTS)
        verdict = abel_check(triple)
        self.assertTrue(verdict.passed, verdict.problems)
        self.assertEqual(verdict.total, 0)

    def test_abel_undeclared_pole(self):
        triple = exact_triple(build_cover(1), RationalMatrix([['(z-1)/(z+1)']]), singularities=ABEL_POINTS[:1])
        verdict = abel_check(triple)
        self.assertFalse(verdict.passed)
        self.assertEqual(verdict.undeclared_poles, 1)
        self.assertEqual(verdict.total, 1)

    def test_abel_wrong_order(self):
        points = [SingularPoint(1 + 0j, (0.0,), (2,)), SingularPoint(-1 + 0j, (0.0,), (-2,))]
        triple = exact_triple(build_cover(1), RationalMatrix([['(z-1)/(z+1)']]), singularities=points)
        self.assertFalse(abel_check(triple).passed)

    def test_constant_shift(self):
        value = he_constant_shift(SHIFT_EXAMPLE["points"], SHIFT_EXAMPLE["shifts"], SHIFT_EXAMPLE["volume"])
        self.assertAlmostEqual(value, SHIFT_EXAMPLE["expected"], places=12)

    def test_opposite_weights_cancel(self):
        self.assertAlmostEqual(he_constant_shift(ABEL_POINTS, [0.7, 0.7], 10.0), 0.0, places=12)

    def test_shift_errors(self):
        with self.assertRaises(TripleError):
            he_constant_shift(ABEL_POINTS, [0.7], 10.0)
        with self.assertRaises(TripleError):
            he_constant_shift(ABEL_POINTS, [0.7, 0.7], 0.0)


class TestSerialization(unittest.TestCase):

    def test_exact_document(self):
        cover = build_cover(1)
        triple = picard_twist(exact_triple(cover, RationalMatrix.identity(2), singularities=ABEL_POINTS),
                              LineCocycle.degree(cover, 1))
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'triple.json')
            save_document(triple_to_dict(triple), path)
            restored = load_triple(path)
        self.assertEqual(restored.transitions, triple.transitions)
        self.assertEqual(restored.singularities, triple.singularities)

    def test_single_monodromy_document(self):
        triple = triple_from_dict({'k': 1, 'G': {'rows': [['1', '0'], ['0', '1']]}})
        self.assertTrue(validate_triple(triple).valid)
        self.assertEqual(triple.rank, 2)

    def test_rank_one_document(self):
        triple = rank_one_solution('z+5', 1, singularities=[SingularPoint('inf', (0.0,), (-1,))])
        restored = triple_from_dict(triple_to_dict(triple))
        z = np.array([1.5 + 0.1j, 0.2 - 1.3j])
        np.testing.assert_allclose(restored.rho(0, 2)(z), triple.rho(0, 2)(z))
        self.assertEqual(restored.singularities, triple.singularities)

    def test_bad_documents(self):
        with self.assertRaises(TripleError):
            triple_from_dict({'kind': 'sheaf', 'k': 1})
        with self.assertRaises(TripleError):
            triple_from_dict({'k': 1})
        with self.assertRaises(TripleError):
            load_document('does-not-exist.json')


if __name__ == '__main__':
    unittest.main()
