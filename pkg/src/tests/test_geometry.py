import unittest
import math

import numpy as np

from geometry import (
    GeometryError,
    FieldGenerator,
    SurfaceChartAtlas,
    base_area,
    build_atlas,
    commutator_residuals,
    convergence_ratio,
    curvature_density,
    field_rows,
    frame_apply,
    gauduchon_residual,
    integrate,
    integration_by_parts_defect,
    laplacian,
    overlap_residual,
    owned_sup,
    scalar_field,
    volume,
)


class TestAtlas(unittest.TestCase):

    def test_rejects_degenerate_bundle(self):
        with self.assertRaises(GeometryError):
            build_atlas(0, 16, 8)

    def test_rejects_small_grids(self):
        with self.assertRaises(GeometryError):
            build_atlas(1, 4, 8)
        with self.assertRaises(GeometryError):
            build_atlas(1, 16, 4)

    def test_grid_layout(self):
        atlas = build_atlas(1, 16, 8)
        self.assertEqual(atlas.h, 1 / 16)
        self.assertEqual(atlas.grid_shape, (2, atlas.nx, atlas.nx))
        # cell-centred: no grid point on a chart centre
        self.assertGreater(np.min(atlas.radius), 0)
        self.assertTrue(np.all(atlas.owned <= atlas.interior))

    def test_check_field_shapes(self):
        atlas = build_atlas(1, 16, 8)
        with self.assertRaises(GeometryError):
            atlas.check_field(np.zeros((2, atlas.nx, atlas.nx, 3, 1, 1)))
        with self.assertRaises(GeometryError):
            atlas.check_field(np.zeros((2, atlas.nx, atlas.nx)))


class TestQuadrature(unittest.TestCase):

    def test_base_area(self):
        for k in (1, 2):
            atlas = build_atlas(k, 16, 8)
            self.assertAlmostEqual(base_area(atlas) / (2 * math.pi * k), 1.0, delta=5e-3)

    def test_volume(self):
        for k in (1, 2):
            atlas = build_atlas(k, 16, 8)
            self.assertAlmostEqual(volume(atlas) / (4 * math.pi ** 2 * k), 1.0, delta=5e-3)

    def test_integrate_one_is_volume(self):
        atlas = build_atlas(1, 16, 8)
        self.assertAlmostEqual(integrate(atlas, np.ones(atlas.grid_shape)).real, volume(atlas), places=10)

    def test_integrate_fiber_harmonic(self):
        atlas = build_atlas(1, 16, 8)
        values = np.broadcast_to(np.sin(atlas.theta), atlas.grid_shape + (atlas.n_theta,))
        self.assertLess(abs(integrate(atlas, values)), 1e-10 * volume(atlas))

    def test_integrate_rejects_matrix_fields(self):
        atlas = build_atlas(1, 16, 8)
        with self.assertRaises(GeometryError):
            integrate(atlas, np.zeros(atlas.grid_shape + (1, 2, 2)))


class TestFrames(unittest.TestCase):

    def setUp(self):
        self.atlas = build_atlas(1, 16, 8)

    def test_constant_field(self):
        field = scalar_field(self.atlas, np.ones(self.atlas.grid_shape))
        for direction in ('v_z', 'v_zbar', 'xi'):
            self.assertLess(owned_sup(self.atlas, frame_apply(self.atlas, field, direction)), 1e-10)
        self.assertLess(owned_sup(self.atlas, laplacian(self.atlas, field)), 1e-10)

    def test_xi_is_fiber_derivative(self):
        values = np.broadcast_to(np.sin(self.atlas.theta), self.atlas.grid_shape + (self.atlas.n_theta,))
        expected = np.broadcast_to(np.cos(self.atlas.theta), self.atlas.grid_shape + (self.atlas.n_theta,))
        derivative = frame_apply(self.atlas, scalar_field(self.atlas, values), 'xi')
        self.assertLess(owned_sup(self.atlas, derivative[..., 0, 0] - expected), 1e-10)

    def test_unknown_direction(self):
        field = scalar_field(self.atlas, np.ones(self.atlas.grid_shape))
        with self.assertRaises(GeometryError):
            frame_apply(self.atlas, field, 'v_w')

    def test_commutator_converges(self):
        residuals = []
        for n_z in (16, 32):
            atlas = build_atlas(1, n_z, 8)
            field = FieldGenerator(atlas, seed=3, max_degree=2).generate('scalar')
            residuals.append(commutator_residuals(atlas, field)['v_z_v_zbar'])
        self.assertLess(residuals[1], residuals[0])

    def test_integration_by_parts(self):
        atlas = build_atlas(1, 32, 8)
        section = FieldGenerator(atlas, seed=5, max_degree=2).generate('section')
        self.assertLess(integration_by_parts_defect(atlas, section), 0.1)

    def test_overlap_consistency(self):
        residuals = []
        for n_z in (16, 32):
            atlas = build_atlas(1, n_z, 8)
            field = FieldGenerator(atlas, seed=2, max_degree=2).generate('scalar')
            residuals.append(overlap_residual(atlas, field))
            self.assertLess(overlap_residual(atlas, atlas.synchronize(field)), 1e-12)
        self.assertLess(residuals[1], residuals[0])

    def test_covariantly_constant_section(self):
        section = np.ones(self.atlas.grid_shape + (1, 1, 1), dtype=complex)
        with self.assertRaises(GeometryError):
            integration_by_parts_defect(self.atlas, section)


class TestFieldRows(unittest.TestCase):

    def setUp(self):
        self.atlas = build_atlas(1, 16, 8)

    def test_per_point_array(self):
        rows = field_rows(self.atlas, self.atlas.density_mu)
        self.assertEqual(len(rows), int(self.atlas.owned.sum()))
        self.assertEqual(set(rows[0]), {'chart', 'i', 'j', 'l', 'row', 'col', 're', 'im'})
        first = rows[0]
        self.assertEqual(first['re'], self.atlas.density_mu[first['chart'], first['i'], first['j']])
        self.assertEqual(first['im'], 0.0)

    def test_matrix_entries(self):
        field = FieldGenerator(self.atlas, seed=1).generate('matrix', 2)
        rows = field_rows(self.atlas, field)
        self.assertEqual(len(rows), int(self.atlas.owned.sum()) * 8 * 4)
        last = rows[-1]
        self.assertEqual((last['l'], last['row'], last['col']), (7, 1, 1))
        value = field[last['chart'], last['i'], last['j'], 7, 1, 1]
        self.assertEqual(complex(last['re'], last['im']), value)

    def test_mask(self):
        mask = self.atlas.owned & (self.atlas.radius < 0.5)
        self.assertEqual(len(field_rows(self.atlas, self.atlas.density_mu, mask)), int(mask.sum()))

    def test_shape_mismatch(self):
        with self.assertRaises(GeometryError):
            field_rows(self.atlas, np.zeros((2, 3, 3)))


class TestGauduchon(unittest.TestCase):

    def test_residual_is_small(self):
        for k in (1, 2):
            self.assertLess(gauduchon_residual(build_atlas(k, 32, 8)), 1e-2)

    def test_residual_converges(self):
        residuals = [gauduchon_residual(build_atlas(1, n_z, 8)) for n_z in (16, 32)]
        ratio = convergence_ratio(residuals)[0]
        self.assertTrue(ratio >= 3.5 or residuals[1] < 1e-9)

    def test_corrupted_density_is_detected(self):
        residuals = [gauduchon_residual(SurfaceChartAtlas(1, n_z, 8, density_offset=(0, 0.1))) for n_z in (16, 32)]
        self.assertGreater(min(residuals), 0.05)

    def test_closure_term_is_reported(self):
        atlas = build_atlas(1, 16, 8)
        closure = owned_sup(atlas, curvature_density(atlas) - atlas.density_mu)
        self.assertGreaterEqual(gauduchon_residual(atlas), closure)

    def test_convergence_ratio(self):
        self.assertEqual(convergence_ratio([4.0, 1.0, 0.25]), [4.0, 4.0])
        self.assertEqual(convergence_ratio([1.0, 0.0]), [float('inf')])


class TestFieldGenerator(unittest.TestCase):

    def setUp(self):
        self.atlas = build_atlas(1, 16, 8)
        self.generator = FieldGenerator(self.atlas, seed=0)

    def test_shapes(self):
        self.assertEqual(self.generator.generate('matrix', 2).shape, self.atlas.grid_shape + (8, 2, 2))
        self.assertEqual(self.generator.generate('section', 3).shape, self.atlas.grid_shape + (8, 3, 1))
        self.assertEqual(self.generator.generate('real', 1, fiber_invariant=True).shape,
                         self.atlas.grid_shape + (1, 1, 1))

    def test_hermitian_symmetry(self):
        field = self.generator.generate('hermitian', 2)
        self.assertLess(np.max(np.abs(field - np.conj(np.swapaxes(field, -1, -2)))), 1e-12)
        field = self.generator.generate('anti_hermitian', 2)
        self.assertLess(np.max(np.abs(field + np.conj(np.swapaxes(field, -1, -2)))), 1e-12)

    def test_unresolved_fiber_modes(self):
        with self.assertRaises(GeometryError):
            FieldGenerator(self.atlas, max_degree=4)
        with self.assertRaises(GeometryError):
            FieldGenerator(build_atlas(2, 16, 8), max_degree=8)
        self.assertEqual(FieldGenerator(build_atlas(2, 16, 8), max_degree=7).generate('scalar').shape,
                         self.atlas.grid_shape + (8, 1, 1))

    def test_unknown_kind(self):
        with self.assertRaises(GeometryError):
            self.generator.generate('tensor')

    def test_seeded(self):
        first = FieldGenerator(self.atlas, seed=11).generate('scalar')
        second = FieldGenerator(self.atlas, seed=11).generate('scalar')
        np.testing.assert_array_equal(first, second)


if __name__ == '__main__':
    unittest.main()
