import io
import unittest
from unittest.mock import patch

import numpy as np
import numpy.testing

from lagmesh import geometry, interpolation
from lagmesh.experiments.studies import make_kernel
from lagmesh.geometry import FootprintConfig, PointSet
from lagmesh.interpolation import (
    Expansion, DegenerateFootprint, InterpolationError, NonInteriorId
)
from lagmesh.kernels import (
    MATERN, SURFACE_SPLINE, Kernel, NonUnisolventPointSet
)
from lagmesh.models import KernelSpec


def _grid(count, step):
    return PointSet.create(np.round(np.arange(count) * step, 12))


class AssembleCollocationTests(unittest.TestCase):
    def test_bordered_system(self):
        k = Kernel.surface_spline(1, 1, sign=1)

        result = interpolation.assemble_collocation(
            k, PointSet.create([0.0, 1.0])
        )

        numpy.testing.assert_allclose([[0, 1], [1, 0]], result.kernel_block)
        numpy.testing.assert_allclose(
            [[0, 1, 1], [1, 0, 1], [1, 1, 0]], result.matrix
        )
        self.assertEqual(2, result.size)

    def test_matern_is_not_bordered(self):
        k = Kernel.matern(1, 1)

        result = interpolation.assemble_collocation(
            k, PointSet.create([0.0, 0.5, 1.0])
        )

        self.assertEqual((3, 3), result.matrix.shape)
        self.assertIsNone(result.vandermonde)

    def test_not_unisolvent(self):
        with self.assertRaises(NonUnisolventPointSet):
            interpolation.assemble_collocation(
                Kernel.surface_spline(2, 1), PointSet.create([0.5])
            )


class SolveFullLagrangeTests(unittest.TestCase):
    def test_two_point_hat(self):
        k = Kernel.surface_spline(1, 1)
        X = PointSet.create([0.0, 1.0])

        basis = interpolation.solve_full_lagrange(k, X, [0, 1])

        numpy.testing.assert_allclose([0.5, -0.5], basis.dense_column(0))
        numpy.testing.assert_allclose([0.5], basis.column(0).polynomial)
        values = basis.synthesis_matrix(np.array([[0.25], [0.5]]))
        numpy.testing.assert_allclose([[0.75, 0.25], [0.5, 0.5]], values)

    def test_delta_property(self):
        cases = [
            (Kernel.matern(2, 2), geometry.Domain.square(), 0.25),
            (Kernel.surface_spline(2, 2), geometry.Domain.square(), 0.25),
            (Kernel.surface_spline(2, 1), geometry.Domain.interval(), 0.2),
        ]
        for k, domain, target_h in cases:
            with self.subTest(family=k.family, d=k.d):
                xi = geometry.generate_quasi_uniform(domain, target_h, seed=0)
                centers = geometry.extend_grid(xi, domain, target_h)

                basis = interpolation.solve_full_lagrange(k, centers, xi.ids)
                values = basis.synthesis_matrix(centers.points)

                expected = np.zeros((len(centers), len(xi)))
                expected[centers.index_of(xi.ids), np.arange(len(xi))] = 1
                numpy.testing.assert_allclose(expected, values, atol=1e-8)

    def test_reproduces_polynomials(self):
        k = Kernel.surface_spline(2, 1)
        X = _grid(11, 0.1)

        basis = interpolation.solve_full_lagrange(k, X, X.ids)
        points = np.linspace(0, 1, 23)[:, None]

        result = basis.synthesis_matrix(points) @ (2 * X.points[:, 0] - 1)

        numpy.testing.assert_allclose(2 * points[:, 0] - 1, result, atol=1e-9)

    def test_side_conditions_hold(self):
        k = Kernel.surface_spline(2, 2)
        xi = geometry.generate_quasi_uniform(
            geometry.Domain.square(), 0.25, seed=3
        )

        basis = interpolation.solve_full_lagrange(k, xi, xi.ids)

        phi = k.polynomial_basis().evaluate(xi.points)
        numpy.testing.assert_allclose(
            0, phi.T @ basis.coefficients.toarray(), atol=1e-8
        )

    @patch('lagmesh.interpolation.estimate_condition', return_value=1e13)
    def test_ill_conditioned_warning(self, estimate):
        k = Kernel.matern(2, 1)
        X = PointSet.create([0.0, 0.5, 1.0])

        basis = interpolation.solve_full_lagrange(k, X, X.ids)

        self.assertEqual(1, len(basis.warnings))
        self.assertIn('ill-conditioned', basis.warnings[0])

    def test_unknown_column(self):
        k = Kernel.matern(1, 1)
        X = PointSet.create([0.0, 1.0])
        basis = interpolation.solve_full_lagrange(k, X, [0])

        with self.assertRaises(NonInteriorId):
            basis.column(1)


class SolveLocalLagrangeTests(unittest.TestCase):
    def test_hat_on_three_points(self):
        k = Kernel.surface_spline(1, 1)
        upsilon = PointSet.create([0.4, 0.5, 0.6])

        column = interpolation.solve_local_lagrange(k, upsilon, 1)
        basis = interpolation.LagrangeBasis.from_columns(
            interpolation.LOCAL, k, upsilon, [column]
        )

        result = basis.synthesis_matrix(
            np.array([[0.4], [0.45], [0.5], [0.55], [0.6]])
        )[:, 0]

        numpy.testing.assert_allclose([0, 0.5, 1, 0.5, 0], result, atol=1e-12)

    def test_single_point_matern(self):
        k = Kernel.matern(2, 1)
        upsilon = PointSet.create([0.5])

        column = interpolation.solve_local_lagrange(k, upsilon, 0)

        numpy.testing.assert_allclose(
            [1 / k.radial(np.array([0.0]))[0]], column.coefficients
        )

    def test_full_footprint_matches_full_basis(self):
        k = Kernel.matern(2, 1)
        X = _grid(9, 0.125)
        full = interpolation.solve_full_lagrange(k, X, X.ids)

        column = interpolation.solve_local_lagrange(k, X, 4)

        numpy.testing.assert_allclose(
            full.dense_column(4), column.coefficients, atol=1e-8
        )

    def test_local_basis(self):
        k = Kernel.surface_spline(1, 1)
        X = _grid(11, 0.1)

        basis = interpolation.local_basis(
            k, X, [3, 5], FootprintConfig(K=0.5, h=0.1)
        )

        self.assertEqual(interpolation.LOCAL, basis.kind)
        numpy.testing.assert_array_equal([3, 5], basis.column_ids)
        numpy.testing.assert_allclose(
            [1, 0], basis.synthesis_matrix(np.array([[0.3]]))[0], atol=1e-12
        )


class TruncateAndProjectTests(unittest.TestCase):
    def setUp(self):
        self.k = Kernel.surface_spline(2, 1)
        self.X = _grid(21, 0.05)
        self.full = interpolation.solve_full_lagrange(self.k, self.X, self.X.ids)

    def test_full_footprint_is_unchanged(self):
        result = interpolation.truncate_and_project(self.full, 10, self.X)

        numpy.testing.assert_allclose(
            self.full.dense_column(10), result.coefficients, rtol=1e-9, atol=1e-8
        )
        self.assertAlmostEqual(0.0, result.tail_mass)

    def test_projected_coefficients_annihilate_polynomials(self):
        upsilon = geometry.footprint(10, self.X, FootprintConfig(K=1, h=0.05))

        result = interpolation.truncate_and_project(self.full, 10, upsilon)

        phi = self.k.polynomial_basis().evaluate(upsilon.points)
        numpy.testing.assert_allclose(
            0, phi.T @ result.coefficients, atol=1e-8
        )
        self.assertGreater(result.tail_mass, 0)

    def test_tail_mass_is_monotone(self):
        tails = [
            interpolation.truncate_and_project(
                self.full, 10,
                geometry.footprint(10, self.X, FootprintConfig(K=K, h=0.05))
            ).tail_mass
            for K in (0.5, 1, 2, 4)
        ]

        self.assertEqual(sorted(tails, reverse=True), tails)

    def test_needs_full_basis(self):
        local = interpolation.local_basis(
            self.k, self.X, [10], FootprintConfig(K=1, h=0.05)
        )

        with self.assertRaises(InterpolationError):
            interpolation.truncate_and_project(local, 10, self.X)

    def test_truncated_basis(self):
        result = interpolation.truncated_basis(
            self.full, FootprintConfig(K=1, h=0.05)
        )

        self.assertEqual(interpolation.TRUNCATED, result.kind)
        self.assertEqual(len(self.full), len(result))

    def test_project_side_conditions(self):
        phi = np.ones((2, 1))

        result = interpolation.project_side_conditions(
            np.array([0.3, 0.0]), phi
        )

        numpy.testing.assert_allclose([0.15, -0.15], result)


class ExpansionTests(unittest.TestCase):
    def setUp(self):
        self.basis = interpolation.solve_full_lagrange(
            Kernel.surface_spline(1, 1), PointSet.create([0.0, 1.0]), [0, 1]
        )

    def test_unit_vector_interpolates(self):
        e = Expansion(self.basis, [1.0, 0.0])

        self.assertAlmostEqual(1.0, interpolation.eval_expansion(e, 0.0))
        self.assertAlmostEqual(0.0, interpolation.eval_expansion(e, 1.0))

    def test_zero_coefficients(self):
        e = Expansion(self.basis, [0.0, 0.0])

        numpy.testing.assert_array_equal(
            [0, 0], e(np.array([[0.3], [0.8]]))
        )

    def test_derivative_of_hat(self):
        e = Expansion(self.basis, [1.0, 0.0])

        result = interpolation.eval_expansion(e, 0.5, (1,))

        self.assertAlmostEqual(-1.0, result)

    def test_many_coefficient_vectors(self):
        e = Expansion(self.basis, np.array([[1.0, 2.0], [0.0, 2.0]]))

        result = e(np.array([[0.5]]))

        numpy.testing.assert_allclose([[0.5, 2.0]], result)

    def test_rejects_wrong_length(self):
        with self.assertRaises(InterpolationError):
            Expansion(self.basis, [1.0])


class NativeInnerProductTests(unittest.TestCase):
    def setUp(self):
        X = _grid(6, 0.2)
        self.basis = interpolation.solve_full_lagrange(
            Kernel.matern(2, 1), X, X.ids
        )

    def test_diagonal_is_positive(self):
        self.assertGreater(
            interpolation.native_inner_product(self.basis, 2, 2), 0
        )

    def test_symmetric(self):
        self.assertAlmostEqual(
            interpolation.native_inner_product(self.basis, 1, 3),
            interpolation.native_inner_product(self.basis, 3, 1)
        )

    def test_non_interior_id(self):
        with self.assertRaises(NonInteriorId):
            interpolation.native_inner_product(self.basis, 2, 17)


def _invariant_cases():
    cases = []
    for h in (0.2, 0.1):
        for family, m in (
            (SURFACE_SPLINE, 1), (SURFACE_SPLINE, 2), (MATERN, 1), (MATERN, 2)
        ):
            cases.append(('interval', h, family, m))
    for h in (0.2, 0.22):
        cases.append(('interval', h, SURFACE_SPLINE, 3))
    for name in ('square', 'disk'):
        for h in (0.3, 0.2):
            for family, m in (
                (SURFACE_SPLINE, 2), (SURFACE_SPLINE, 3),
                (MATERN, 2), (MATERN, 3)
            ):
                cases.append((name, h, family, m))
    return cases


class LagrangeInvariantTests(unittest.TestCase):
    def test_battery(self):
        cases = _invariant_cases()
        self.assertGreaterEqual(len(cases), 20)

        for seed, (name, h, family, m) in enumerate(cases):
            with self.subTest(domain=name, h=h, family=family, m=m):
                domain = geometry.get_domain(name)
                k = make_kernel(KernelSpec(family, m), domain.dim)
                X = geometry.generate_quasi_uniform(domain, h, seed)
                probes = geometry.generate_quasi_uniform(
                    domain, h, seed + 100
                ).points

                basis = interpolation.solve_full_lagrange(k, X, X.ids)

                numpy.testing.assert_allclose(
                    np.eye(len(X)), basis.synthesis_matrix(X.points),
                    atol=1e-8
                )
                A = basis.coefficients.toarray()
                self.assertLessEqual(
                    np.max(np.abs(A - A.T)), 1e-8 * np.max(np.abs(A))
                )
                if family != SURFACE_SPLINE:
                    continue
                phi = k.polynomial_basis().evaluate
                numpy.testing.assert_allclose(
                    phi(probes),
                    basis.synthesis_matrix(probes) @ phi(X.points),
                    atol=1e-8
                )
                xi_id = int(X.ids[len(X) // 2])
                upsilon = geometry.footprint(
                    xi_id, X, FootprintConfig(K=2, h=h)
                )
                truncated = interpolation.truncate_and_project(
                    basis, xi_id, upsilon
                )
                residual = phi(upsilon.points).T @ truncated.coefficients
                self.assertLessEqual(
                    np.max(np.abs(residual)),
                    1e-10 * max(1.0, np.max(np.abs(truncated.coefficients)))
                )


class ThetaTests(unittest.TestCase):
    def test_two_points(self):
        theta, coeff_norm = interpolation.theta_vs_coeff_norm(
            Kernel.surface_spline(1, 1), PointSet.create([0.0, 1.0])
        )

        self.assertAlmostEqual(1.0, theta)
        self.assertAlmostEqual(1.0, coeff_norm)

    def test_scales_with_kernel(self):
        upsilon = PointSet.create([0.0, 0.3, 0.7, 1.0])
        theta, coeff_norm = interpolation.theta_vs_coeff_norm(
            Kernel.surface_spline(2, 1), upsilon
        )

        scaled_theta, scaled_norm = interpolation.theta_vs_coeff_norm(
            Kernel.surface_spline(2, 1, scale=2.0), upsilon
        )

        self.assertAlmostEqual(2 * theta, scaled_theta)
        self.assertAlmostEqual(coeff_norm / 2, scaled_norm)

    def test_pure_polynomial_footprint(self):
        with self.assertRaises(DegenerateFootprint):
            interpolation.theta_vs_coeff_norm(
                Kernel.surface_spline(1, 1), PointSet.create([0.5])
            )

    def test_product_is_one_on_random_footprints(self):
        k = Kernel.surface_spline(2, 2)
        square = geometry.Domain.square()
        rng = np.random.default_rng(0)

        for seed in range(20):
            X = geometry.generate_quasi_uniform(square, 0.1, seed)
            xi_id = int(rng.choice(X.ids))
            K = rng.uniform(1.0, 2.0)
            upsilon = geometry.footprint(xi_id, X, FootprintConfig(K, 0.1))
            with self.subTest(seed=seed, size=len(upsilon)):
                self.assertLessEqual(len(upsilon), 200)

                theta, coeff_norm = interpolation.theta_vs_coeff_norm(
                    k, upsilon
                )

                self.assertAlmostEqual(1.0, theta * coeff_norm, delta=1e-6)

    def test_footprint_spanned_by_polynomials(self):
        cases = [
            (Kernel.surface_spline(2, 2), [[0, 0], [1, 0], [0, 1]]),
            (Kernel.surface_spline(3, 1), [0.1, 0.5, 0.9]),
            (Kernel.surface_spline(2, 1), [0.2, 0.7]),
        ]

        for k, points in cases:
            with self.subTest(m=k.m, d=k.d):
                with self.assertRaises(DegenerateFootprint):
                    interpolation.theta_vs_coeff_norm(
                        k, PointSet.create(np.array(points, dtype=float))
                    )

    def test_one_point_beyond_polynomials(self):
        upsilon = PointSet.create(
            np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
        )

        theta, coeff_norm = interpolation.theta_vs_coeff_norm(
            Kernel.surface_spline(2, 2), upsilon
        )

        self.assertGreater(theta, 1e-6)
        self.assertAlmostEqual(1.0, theta * coeff_norm, delta=1e-6)

    def test_matern_is_rejected(self):
        with self.assertRaises(InterpolationError):
            interpolation.theta_vs_coeff_norm(
                Kernel.matern(1, 1), PointSet.create([0.0, 1.0])
            )


class WriteBasisTests(unittest.TestCase):
    def test_format(self):
        basis = interpolation.solve_full_lagrange(
            Kernel.surface_spline(1, 1), PointSet.create([0.0, 1.0]), [0]
        )
        out = io.StringIO()

        interpolation.write_basis(basis, out)

        lines = out.getvalue().splitlines()
        self.assertEqual('# kind full family surface_spline m 1 d 1', lines[0])
        self.assertEqual(4, len(lines))
        self.assertEqual(['0', '0'], lines[1].split()[:2])
        self.assertEqual(['0', 'poly', '0'], lines[3].split()[:3])
