import math
import unittest
from unittest.mock import patch

import numpy as np
import numpy.testing

from lagmesh import geometry
from lagmesh.experiments import studies
from lagmesh.geometry import PointSetMetrics
from lagmesh.interpolation import FULL, LOCAL
from lagmesh.kernels import MATERN, SURFACE_SPLINE
from lagmesh.models import CellRecord, KernelSpec, StudyConfig
from lagmesh.norms import UnsupportedDomainBoundary


def _config(kind='stability', **kwargs):
    values = {
        'h_levels': [0.2, 0.1],
        'n_random_coeff': 10,
        'quadrature_fraction': 0.05,
        'p_values': [2.0],
    }
    values.update(kwargs)
    return StudyConfig(
        kind, 'interval', KernelSpec(SURFACE_SPLINE, 2), **values
    )


def _level(cfg, index=0):
    domain = geometry.get_domain(cfg.domain)
    kernel = studies.make_kernel(cfg.kernel, domain.dim)
    return studies.prepare_level(cfg, domain, kernel, index)


class MakeKernelTests(unittest.TestCase):
    def test_families(self):
        matern = studies.make_kernel(KernelSpec(MATERN, 2), 2)
        spline = studies.make_kernel(KernelSpec(SURFACE_SPLINE, 3), 1)

        self.assertEqual((MATERN, 2, 2), (matern.family, matern.m, matern.d))
        self.assertEqual(
            (SURFACE_SPLINE, 3, 1), (spline.family, spline.m, spline.d)
        )


class PrepareLevelTests(unittest.TestCase):
    def setUp(self):
        self.cfg = _config()
        self.level = _level(self.cfg)

    def test_centers_extend_interior(self):
        numpy.testing.assert_array_equal(
            self.level.xi.ids, self.level.centers.ids[:len(self.level.xi)]
        )
        self.assertGreater(len(self.level.centers), len(self.level.xi))
        self.assertLessEqual(np.max(np.abs(self.level.centers.points - 0.5)), 1.5)

    def test_quadrature_resolution(self):
        resolution = 0.05 * self.level.h

        self.assertAlmostEqual(resolution, self.level.quadrature.resolution)
        self.assertAlmostEqual(
            resolution / 7 + resolution / 2, self.level.quadrature.nodes[0, 0]
        )
        self.assertTrue(self.level.quadrature_ok)

    def test_boundary(self):
        numpy.testing.assert_array_equal(
            [[0.0], [1.0]], self.level.boundary.nodes
        )

    def test_level_seed(self):
        first = _level(self.cfg, 1)
        second = _level(self.cfg, 1)

        numpy.testing.assert_array_equal(first.xi.points, second.xi.points)
        self.assertLess(first.h, self.level.h)

    def test_bases_are_cached(self):
        self.assertIs(self.level.basis(FULL), self.level.basis(FULL))
        self.assertEqual(LOCAL, self.level.basis(LOCAL).kind)

    def test_deepest_centers(self):
        order, depth = self.level.deepest_centers(2)

        self.assertEqual(2, len(order))
        self.assertEqual(np.max(depth), depth[order[0]])


class CoefficientDrawsTests(unittest.TestCase):
    def test_random_then_unit_vectors(self):
        result = studies.coefficient_draws(_config(), 3)

        self.assertEqual((3, 13), result.shape)
        numpy.testing.assert_array_equal(np.eye(3), result[:, 10:])

    def test_deterministic(self):
        numpy.testing.assert_array_equal(
            studies.coefficient_draws(_config(), 4),
            studies.coefficient_draws(_config(), 4)
        )


class FitDecayTests(unittest.TestCase):
    def test_exponential(self):
        distances = 2.25 + 0.5 * np.arange(16)

        result = studies.fit_decay(distances, np.exp(-1.5 * distances), 2, 10)

        self.assertAlmostEqual(-1.5, result.slope)
        self.assertAlmostEqual(1.0, result.r_squared)

    def test_uses_envelope(self):
        distances = np.repeat(2.25 + 0.5 * np.arange(8), 2)
        values = np.exp(-distances) * np.tile([1.0, 1e-3], 8)

        result = studies.fit_decay(distances, values, 2, 6)

        self.assertAlmostEqual(-1.0, result.slope)

    def test_narrow_window(self):
        distances = np.linspace(2, 3, 20)

        self.assertIsNone(studies.fit_decay(distances, distances, 2, 3))

    def test_too_few_nonzero_bins(self):
        distances = 2.25 + 0.5 * np.arange(16)
        values = np.zeros(16)
        values[:3] = 1

        self.assertIsNone(studies.fit_decay(distances, values, 2, 10))


class DecayCellsTests(unittest.TestCase):
    def test_coarse_level_has_no_window(self):
        level = _level(_config('decay'))

        result = studies.decay_cells(level)

        self.assertEqual(
            ['pointwise', 'coefficient'], [r.kind for r in result]
        )
        for record in result:
            self.assertEqual('decay', record.study)
            self.assertTrue(record.skipped)
            self.assertEqual('insufficient distance bins', record.warn)

    def test_matern_decay_on_interval(self):
        cfg = StudyConfig(
            'decay', 'interval', KernelSpec(MATERN, 2), h_levels=[0.05]
        )

        result = studies.decay_cells(_level(cfg))

        self.assertEqual(
            ['pointwise', 'coefficient'], [r.kind for r in result]
        )
        for record in result:
            self.assertFalse(record.skipped)
            self.assertLess(record.slope, 0)
            self.assertGreater(record.ratio_min, 0)
            self.assertGreaterEqual(record.resid, 0.9)


class DecayOffsetsTests(unittest.TestCase):
    def test_interval(self):
        result = studies.decay_offsets(1, 1.0, 0.5)

        numpy.testing.assert_allclose([[-1], [-0.5], [0], [0.5], [1]], result)

    def test_square_keeps_ball(self):
        result = studies.decay_offsets(2, 1.0, 0.5)

        self.assertEqual(13, len(result))
        self.assertLessEqual(np.max(np.linalg.norm(result, axis=1)), 1.0)


class StabilityCellsTests(unittest.TestCase):
    def test_cells(self):
        level = _level(_config())

        result = studies.stability_cells(level)

        self.assertEqual(
            [('stability', 'full'), ('nikolskii', 'full:r=2'),
             ('stability', 'local'), ('nikolskii', 'local:r=2')],
            [(r.study, r.kind) for r in result]
        )
        self.assertEqual([2.0, math.inf, 2.0, math.inf], [r.p for r in result])
        for record in result:
            self.assertFalse(record.skipped)
            self.assertGreater(record.ratio_min, 0)
            self.assertLessEqual(record.ratio_min, record.ratio_max)

    def test_coarse_quadrature_is_skipped(self):
        level = _level(_config(quadrature_fraction=0.5, basis_kinds=['full']))

        result = studies.stability_cells(level)

        self.assertEqual('quadrature too coarse for q', result[0].warn)
        self.assertTrue(result[0].skipped)


class BernsteinCellsTests(unittest.TestCase):
    def test_order_zero_ratio_is_one(self):
        level = _level(_config(basis_kinds=['full'], sigma_values=[0.0]))

        result = studies.bernstein_cells(level)

        self.assertEqual(['full', 'full:synthesis'], [r.kind for r in result])
        self.assertAlmostEqual(1.0, result[0].ratio_min)
        self.assertAlmostEqual(1.0, result[0].ratio_max)

    def test_sigma_outside_range(self):
        level = _level(_config(basis_kinds=['full'], sigma_values=[3.0]))

        result = studies.bernstein_cells(level)

        self.assertEqual(2, len(result))
        for record in result:
            self.assertEqual('sigma outside theorem range', record.warn)

    @patch('lagmesh.experiments.studies.FRACTIONAL_NODES', 50)
    def test_fractional_sigma_on_coarse_rule(self):
        level = _level(_config(basis_kinds=['full'], sigma_values=[1.5]))

        result = studies.bernstein_cells(level)

        rule = level.fractional_rule()
        self.assertLessEqual(len(rule), 50)
        self.assertGreater(len(level.quadrature), 50)
        self.assertIs(rule, level.fractional_rule())
        for record in result:
            self.assertFalse(record.skipped)
            self.assertIn('fractional part on coarse rule', record.warn)

    def test_fractional_sigma_on_fine_rule(self):
        level = _level(_config(basis_kinds=['full'], sigma_values=[1.5]))

        result = studies.bernstein_cells(level)

        self.assertIs(level.quadrature, level.fractional_rule())
        for record in result:
            self.assertFalse(record.skipped)
            self.assertNotIn('coarse rule', record.warn)

    def test_fractional_sigma_at_infinity(self):
        level = _level(_config(
            basis_kinds=['full'], p_values=[math.inf], sigma_values=[0.5]
        ))

        result = studies.bernstein_cells(level)

        self.assertTrue(all(r.skipped for r in result))


class TraceCellsTests(unittest.TestCase):
    def test_cells(self):
        level = _level(_config(basis_kinds=['full'], p_values=[2.0, math.inf]))

        result = studies.trace_cells(level)

        self.assertEqual(
            [('trace', 2.0), ('trace_split', 2.0), ('trace', math.inf)],
            [(r.study, r.p) for r in result]
        )
        self.assertLessEqual(result[2].ratio_max, 1.0)

    def test_needs_boundary(self):
        level = _level(_config())
        level.boundary = None

        with self.assertRaises(UnsupportedDomainBoundary):
            studies.trace_cells(level)


class TruncationCellsTests(unittest.TestCase):
    def test_cells(self):
        level = _level(_config('truncation', K_values=[1.0, 2.0, 3.0]))

        result = studies.truncation_cells(level)

        kinds = [
            'tail', 'truncated_linf', 'local_linf', 'local_truncated_linf',
            'truncated_w21', 'local_w21', 'projection_l2'
        ]
        self.assertEqual(kinds * 3, [r.kind for r in result])
        self.assertEqual([1.0] * 7 + [2.0] * 7 + [3.0] * 7, [r.K for r in result])
        measured = [r for r in result if not r.skipped]
        self.assertTrue(measured)
        for record in measured:
            self.assertGreaterEqual(record.ratio_min, 0)

    def test_errors_fall_with_K(self):
        for family in (SURFACE_SPLINE, MATERN):
            cfg = StudyConfig(
                'truncation', 'interval', KernelSpec(family, 2),
                h_levels=[0.05], K_values=[2.0, 4.0, 6.0, 8.0]
            )

            result = studies.truncation_cells(_level(cfg))

            for kind in ('tail', 'truncated_linf'):
                with self.subTest(family=family, kind=kind):
                    values = [r.ratio_max for r in result if r.kind == kind]
                    self.assertEqual(4, len(values))
                    for earlier, later in zip(values, values[1:]):
                        self.assertLessEqual(later, earlier + 1e-9 * values[0])
                    self.assertLessEqual(values[-1], values[0] / 10)

    def test_footprint_covering_everything(self):
        level = _level(_config('truncation', K_values=[40.0, 50.0, 60.0]))

        result = studies.truncation_cells(level)

        self.assertEqual(21, len(result))
        for record in result:
            self.assertFalse(record.skipped)
            self.assertLessEqual(record.ratio_max, 1e-8)


class ThetaCellsTests(unittest.TestCase):
    def test_cells(self):
        level = _level(_config('theta', K_values=[2.0, 4.0]))

        result = studies.theta_cells(level)

        self.assertEqual(['footprint', 'footprint'], [r.kind for r in result])
        self.assertEqual([2.0, 4.0], [r.K for r in result])

    def test_product_is_one(self):
        level = _level(_config('theta', h_levels=[0.1], K_values=[2.0, 4.0]))

        result = studies.theta_cells(level)

        for record in result:
            self.assertFalse(record.skipped)
            self.assertAlmostEqual(1.0, record.ratio_min, delta=1e-6)
            self.assertAlmostEqual(1.0, record.ratio_max, delta=1e-6)


class GramCellsTests(unittest.TestCase):
    def test_scaled_norm_is_constant(self):
        cfg = StudyConfig(
            'gram', 'square', KernelSpec(SURFACE_SPLINE, 2), radii=[1.0, 0.5]
        )

        result = studies.gram_cells(cfg, 2)

        self.assertEqual([1.0, 0.5], [r.h for r in result])
        for record in result:
            self.assertEqual('pattern', record.kind)
            self.assertAlmostEqual(0.16, record.ratio_max)


class FillGrowthFactorsTests(unittest.TestCase):
    def _record(self, ratio, **kwargs):
        return CellRecord(
            'stability', 'full', p=2.0, ratio_min=ratio, ratio_max=ratio,
            **kwargs
        )

    def test_growth_over_previous_level(self):
        records = [self._record(2.0), self._record(6.0)]

        studies.fill_growth_factors(records)

        self.assertIsNone(records[0].slope)
        self.assertAlmostEqual(3.0, records[1].slope)

    def test_keeps_fitted_slope(self):
        records = [self._record(2.0), self._record(6.0, slope=-1.0)]

        studies.fill_growth_factors(records)

        self.assertEqual(-1.0, records[1].slope)

    def test_skipped_cell_breaks_series(self):
        records = [
            self._record(2.0), CellRecord('stability', 'full', p=2.0),
            self._record(6.0)
        ]

        studies.fill_growth_factors(records)

        self.assertIsNone(records[2].slope)

    def test_series_are_separate(self):
        metrics = PointSetMetrics(0.1, 0.05, 2.0, 0.01)
        records = [
            self._record(2.0, metrics=metrics),
            CellRecord('stability', 'local', p=2.0, ratio_min=1, ratio_max=5),
            self._record(4.0, metrics=metrics),
        ]

        studies.fill_growth_factors(records)

        self.assertIsNone(records[1].slope)
        self.assertAlmostEqual(2.0, records[2].slope)
