import unittest

from lagmesh.geometry import PointSetMetrics
from lagmesh.models import CellRecord, ExperimentReport, StudyConfig, KernelSpec


class CellRecordTests(unittest.TestCase):
    def setUp(self):
        self.metrics = PointSetMetrics(
            fill_distance=0.2, separation_radius=0.1, mesh_ratio=2.0,
            probe_resolution=0.01
        )

    def test_level_properties(self):
        record = CellRecord('decay', 'pointwise', metrics=self.metrics)

        self.assertEqual(0.2, record.h)
        self.assertEqual(0.1, record.q)
        self.assertEqual(2.0, record.rho)

    def test_radius_stands_in_for_h(self):
        record = CellRecord('gram', 'pattern', radius=0.5)

        self.assertEqual(0.5, record.h)
        self.assertIsNone(record.q)
        self.assertIsNone(record.rho)

    def test_skipped(self):
        self.assertTrue(CellRecord('trace', 'full', warn='no boundary').skipped)
        self.assertFalse(
            CellRecord('trace', 'full', ratio_min=1, ratio_max=2).skipped
        )

    def test_series_ignores_level(self):
        first = CellRecord('stability', 'full', metrics=self.metrics, p=2.0)
        second = CellRecord('stability', 'full', p=2.0, ratio_max=3.0)

        self.assertEqual(first.series(), second.series())
        self.assertEqual(('stability', 'full', 2.0, None, None), first.series())


class ExperimentReportTests(unittest.TestCase):
    def test_degenerate_when_all_skipped(self):
        report = ExperimentReport(
            'trace', [CellRecord('trace', 'full'), CellRecord('trace', 'local')]
        )

        self.assertTrue(report.degenerate)

    def test_not_degenerate_with_a_measurement(self):
        report = ExperimentReport('trace', [
            CellRecord('trace', 'full'),
            CellRecord('trace', 'local', ratio_min=1, ratio_max=1)
        ])

        self.assertFalse(report.degenerate)


class StudyConfigTests(unittest.TestCase):
    def test_defaults_are_not_shared(self):
        first = StudyConfig('decay', 'square', KernelSpec('matern', 2))
        second = StudyConfig('decay', 'square', KernelSpec('matern', 2))

        first.K_values.append(10.0)

        self.assertEqual([2.0, 4.0, 6.0, 8.0], second.K_values)
