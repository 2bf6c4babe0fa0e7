"""
Full, truncated and local Lagrange bases.

A Lagrange function chi_xi = sum_zeta A[zeta, xi] k(. - zeta) + p_xi
interpolates delta(xi, .) on its nodes. Surface splines border the
collocation matrix with the polynomial Vandermonde block so that the
kernel coefficients annihilate polynomials of degree below m.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.spatial.distance

from . import geometry
from .kernels import kernel_matrix, vandermonde


FULL = 'full'
TRUNCATED = 'truncated'
LOCAL = 'local'
_CONDITION_LIMIT = 1e12
_POWER_ITERATIONS = 60
_EIGEN_TOL = 1e-10
_MAX_DENSE_FOOTPRINT = 500
_EVAL_CHUNK = 4_000_000
_logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CollocationSystem:
    """
    Collocation matrix of a kernel on a point set.

    :param matrix: Square system; bordered by the Vandermonde block for
                   conditionally positive kernels
    :param kernel_block: The (n, n) kernel matrix
    :param vandermonde: VandermondeSystem or None
    """
    matrix: np.ndarray
    kernel_block: np.ndarray
    vandermonde: object = None

    @property
    def size(self):
        return len(self.kernel_block)


@dataclass(frozen=True, eq=False)
class LagrangeColumn:
    """
    One Lagrange function.

    :param xi_id: Id of the center where the function is 1
    :param center_ids: Ids of the centers carrying kernel coefficients
    :param coefficients: Kernel coefficients aligned with center_ids
    :param polynomial: Polynomial coefficients, empty for Matérn
    :param tail_mass: Sum of dropped |coefficients| for truncated columns
    """
    xi_id: int
    center_ids: np.ndarray
    coefficients: np.ndarray
    polynomial: np.ndarray
    tail_mass: float = 0.0


@dataclass(eq=False)
class LagrangeBasis:
    """
    A set of Lagrange functions over common centers.

    Kernel coefficients are stored as a sparse (centers x columns)
    matrix; polynomial coefficients as a dense (N x columns) matrix.
    """
    kind: str
    kernel: object
    centers: geometry.PointSet
    column_ids: np.ndarray
    coefficients: scipy.sparse.csc_matrix
    polynomial: np.ndarray
    poly_basis: object = None
    footprint_cfg: Optional[geometry.FootprintConfig] = None
    warnings: List[str] = field(default_factory=list)
    tail_mass: Optional[np.ndarray] = None

    @classmethod
    def from_columns(cls, kind, kernel, centers, columns, footprint_cfg=None):
        """
        Assemble a basis from LagrangeColumn objects.

        :param centers: PointSet every column's center ids belong to
        :param columns: Sequence of LagrangeColumn
        """
        rows, cols, data = [], [], []
        for j, column in enumerate(columns):
            rows.append(centers.index_of(column.center_ids))
            cols.append(np.full(len(column.center_ids), j))
            data.append(column.coefficients)
        poly_basis = kernel.polynomial_basis()
        n_poly = poly_basis.N if poly_basis else 0
        matrix = scipy.sparse.csc_matrix(
            (
                np.concatenate(data) if data else [],
                (np.concatenate(rows) if rows else [],
                 np.concatenate(cols) if cols else [])
            ),
            shape=(len(centers), len(columns))
        )
        polynomial = (
            np.column_stack([c.polynomial for c in columns])
            if columns and n_poly else np.zeros((n_poly, len(columns)))
        )
        return cls(
            kind=kind,
            kernel=kernel,
            centers=centers,
            column_ids=np.array([c.xi_id for c in columns], dtype=int),
            coefficients=matrix,
            polynomial=polynomial,
            poly_basis=poly_basis,
            footprint_cfg=footprint_cfg,
            tail_mass=np.array([c.tail_mass for c in columns])
        )

    def __len__(self):
        return len(self.column_ids)

    def column_index(self, xi_id):
        """
        Position of a column by center id.

        :raises NonInteriorId: If the basis has no such column
        """
        matches = np.flatnonzero(self.column_ids == xi_id)
        if not len(matches):
            raise NonInteriorId(xi_id)
        return int(matches[0])

    def column(self, xi_id):
        """
        Get one Lagrange function.

        :param xi_id: Center id of the column
        :returns: LagrangeColumn over the centers it is supported on
        """
        j = self.column_index(xi_id)
        col = self.coefficients.getcol(j).tocoo()
        order = np.argsort(col.row)
        return LagrangeColumn(
            xi_id=int(xi_id),
            center_ids=self.centers.ids[col.row[order]],
            coefficients=col.data[order],
            polynomial=self.polynomial[:, j].copy(),
            tail_mass=(
                float(self.tail_mass[j]) if self.tail_mass is not None else 0.0
            )
        )

    def subset(self, xi_ids):
        """
        Restrict the basis to some of its columns.

        :param xi_ids: Center ids of the columns to keep, in order
        :raises NonInteriorId: If the basis has no such column
        """
        positions = [self.column_index(xi_id) for xi_id in xi_ids]
        return replace(
            self,
            column_ids=self.column_ids[positions],
            coefficients=self.coefficients[:, positions],
            polynomial=self.polynomial[:, positions],
            warnings=list(self.warnings),
            tail_mass=(
                self.tail_mass[positions]
                if self.tail_mass is not None else None
            )
        )

    def dense_column(self, xi_id):
        """Kernel coefficients of one column over every center."""
        column = self.coefficients.getcol(self.column_index(xi_id))
        return column.toarray().ravel()

    def synthesis_matrix(self, points, alpha=None, singular='raise'):
        """
        Matrix of D^alpha chi_xi(x), rows x in points, one column per xi.

        :param points: (n, d) evaluation points
        :param alpha: Multi-index or None for values
        :param singular: 'raise' or 'nan' at singular kernel derivatives
        """
        return self._apply(
            points, self.coefficients, self.polynomial, alpha, singular
        )

    def _apply(self, points, coefficients, polynomial, alpha, singular):
        points = np.asarray(points, dtype=float).reshape(-1, self.centers.dim)
        coefficients = scipy.sparse.csr_matrix(coefficients)
        active = np.flatnonzero(np.diff(coefficients.indptr))
        centers = self.centers.points[active]
        weights = coefficients[active]
        result = np.zeros((len(points), coefficients.shape[1]))
        chunk = max(1, _EVAL_CHUNK // max(len(active), 1))
        for lo in range(0, len(points), chunk):
            block = points[lo:lo + chunk]
            values = kernel_matrix(self.kernel, block, centers, alpha, singular)
            result[lo:lo + chunk] = (weights.T @ values.T).T
        if self.poly_basis is not None and polynomial.size:
            alpha = alpha or (0,) * self.centers.dim
            result += self.poly_basis.derivative(points, alpha) @ polynomial
        return result


@dataclass(frozen=True, eq=False)
class Expansion:
    """
    A member s = sum_xi a_xi chi_xi of the span of a basis.

    :param basis: LagrangeBasis
    :param a: One coefficient per basis column
    """
    basis: LagrangeBasis
    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.shape[0] != len(self.basis):
            raise InterpolationError(
                f'expected {len(self.basis)} coefficients, got {a.shape[0]}'
            )
        object.__setattr__(self, 'a', a)

    def __call__(self, points, alpha=None, singular='raise'):
        """
        Evaluate D^alpha s at points.

        :returns: (n,) array, or (n, k) if a holds k coefficient vectors
        """
        a = self.a if self.a.ndim == 2 else self.a[:, None]
        values = self.basis._apply(
            points,
            self.basis.coefficients @ scipy.sparse.csc_matrix(a),
            self.basis.polynomial @ a,
            alpha,
            singular
        )
        return values if self.a.ndim == 2 else values[:, 0]


def assemble_collocation(k, X):
    """
    Assemble the collocation matrix of a kernel on a point set.

    :param k: Kernel
    :param X: PointSet with positive separation
    :returns: CollocationSystem of size n (Matérn) or n + N (bordered)
    :raises NonUnisolventPointSet: For surface splines on a set that does
                                   not determine polynomials
    """
    points = X.points
    kernel_block = k.radial(scipy.spatial.distance.cdist(points, points))
    basis = k.polynomial_basis()
    if basis is None:
        return CollocationSystem(kernel_block, kernel_block)
    system = vandermonde(points, basis)
    n_poly = basis.N
    matrix = np.block([
        [kernel_block, system.phi],
        [system.phi.T, np.zeros((n_poly, n_poly))]
    ])
    return CollocationSystem(matrix, kernel_block, system)


def factorize(system):
    """
    LU-factorize a collocation system with partial pivoting.

    :returns: Tuple (lu, piv) for scipy.linalg.lu_solve
    :raises SingularSystem: On an exactly singular factor
    """
    lu, piv = scipy.linalg.lu_factor(system.matrix, check_finite=True)
    if np.any(np.diag(lu) == 0):
        raise SingularSystem(len(system.matrix))
    return lu, piv


def estimate_condition(system, factor):
    """
    Estimate the 2-norm condition number by power iteration.

    :param system: CollocationSystem
    :param factor: (lu, piv) of the system matrix
    """
    rng = np.random.default_rng(0)
    start = rng.standard_normal(len(system.matrix))
    largest = _power_iteration(lambda v: system.matrix @ v, start)
    inverse = _power_iteration(
        lambda v: scipy.linalg.lu_solve(factor, v), start
    )
    return largest * inverse


def solve_full_lagrange(k, Xi_tilde, interior_ids):
    """
    Compute the Lagrange functions of interior centers over Xi_tilde.

    :param k: Kernel
    :param Xi_tilde: All centers
    :param interior_ids: Ids of the centers needing Lagrange functions
    :returns: LagrangeBasis of kind FULL
    :raises SingularSystem: If the collocation matrix is singular
    """
    system = assemble_collocation(k, Xi_tilde)
    factor = factorize(system)
    interior_ids = np.asarray(interior_ids, dtype=int)
    rhs = np.zeros((len(system.matrix), len(interior_ids)))
    rhs[Xi_tilde.index_of(interior_ids), np.arange(len(interior_ids))] = 1
    solution = scipy.linalg.lu_solve(factor, rhs)
    n = system.size
    poly_basis = k.polynomial_basis()
    basis = LagrangeBasis(
        kind=FULL,
        kernel=k,
        centers=Xi_tilde,
        column_ids=interior_ids,
        coefficients=scipy.sparse.csc_matrix(solution[:n]),
        polynomial=solution[n:],
        poly_basis=poly_basis,
        tail_mass=np.zeros(len(interior_ids))
    )
    condition = estimate_condition(system, factor)
    if condition > _CONDITION_LIMIT:
        message = f'ill-conditioned collocation system: cond ~ {condition:.3g}'
        _logger.warning(message)
        basis.warnings.append(message)
    return basis


def solve_local_lagrange(k, Upsilon, xi_id):
    """
    Compute the Lagrange function of xi on its footprint alone.

    :param k: Kernel
    :param Upsilon: Footprint point set containing xi_id
    :param xi_id: Id of the center
    :returns: LagrangeColumn over the footprint ids
    """
    system = assemble_collocation(k, Upsilon)
    factor = factorize(system)
    rhs = np.zeros(len(system.matrix))
    rhs[Upsilon.index_of(xi_id)] = 1
    solution = scipy.linalg.lu_solve(factor, rhs)
    n = system.size
    return LagrangeColumn(
        xi_id=int(xi_id),
        center_ids=Upsilon.ids.copy(),
        coefficients=solution[:n],
        polynomial=solution[n:]
    )


def project_side_conditions(a, phi):
    """
    Remove from a its component in the range of phi.

    :param a: Coefficient vector
    :param phi: Vandermonde matrix of the same points
    :returns: (I - phi (phi^T phi)^-1 phi^T) a
    """
    gram = phi.T @ phi
    return a - phi @ scipy.linalg.solve(gram, phi.T @ a, assume_a='pos')


def truncate_and_project(full, xi_id, Upsilon):
    """
    Truncate a full Lagrange function to a footprint.

    Kernel coefficients outside Upsilon are dropped; for surface splines
    the rest are projected so they again annihilate polynomials on
    Upsilon. Polynomial coefficients are kept unchanged.

    :param full: LagrangeBasis of kind FULL
    :param xi_id: Column id
    :param Upsilon: Footprint, a subset of full.centers
    :returns: LagrangeColumn
    :raises NonUnisolventPointSet: If Upsilon does not determine
                                   polynomials
    """
    if full.kind != FULL:
        raise InterpolationError(f'cannot truncate a {full.kind} basis')
    column = full.dense_column(xi_id)
    kept = column[full.centers.index_of(Upsilon.ids)]
    tail_mass = float(np.sum(np.abs(column)) - np.sum(np.abs(kept)))
    if full.poly_basis is not None:
        kept = project_side_conditions(
            kept, vandermonde(Upsilon, full.poly_basis).phi
        )
    _logger.debug('truncated column %s, tail mass %.3g', xi_id, tail_mass)
    return LagrangeColumn(
        xi_id=int(xi_id),
        center_ids=Upsilon.ids.copy(),
        coefficients=kept,
        polynomial=full.polynomial[:, full.column_index(xi_id)].copy(),
        tail_mass=max(tail_mass, 0.0)
    )


def truncated_basis(full, cfg):
    """
    Truncate every column of a full basis to its footprint.

    :param full: LagrangeBasis of kind FULL
    :param cfg: FootprintConfig
    """
    columns = [
        truncate_and_project(
            full, xi_id, geometry.footprint(xi_id, full.centers, cfg)
        )
        for xi_id in full.column_ids
    ]
    return LagrangeBasis.from_columns(
        TRUNCATED, full.kernel, full.centers, columns, cfg
    )


def local_basis(k, X_tilde, interior_ids, cfg):
    """
    Solve a local Lagrange function on the footprint of each center.

    :param k: Kernel
    :param X_tilde: All centers
    :param interior_ids: Ids of the centers needing Lagrange functions
    :param cfg: FootprintConfig
    """
    columns = [
        solve_local_lagrange(k, geometry.footprint(xi_id, X_tilde, cfg), xi_id)
        for xi_id in interior_ids
    ]
    return LagrangeBasis.from_columns(LOCAL, k, X_tilde, columns, cfg)


def eval_expansion(e, x, alpha=None):
    """
    Evaluate D^alpha of an expansion at one point.

    :param e: Expansion
    :param x: d-vector (or scalar for d = 1)
    :param alpha: Multi-index or None
    """
    point = np.reshape(np.asarray(x, dtype=float), (1, e.basis.centers.dim))
    return float(e(point, alpha)[0])


def native_inner_product(full, xi_id, zeta_id):
    """
    Native space inner product of two full Lagrange functions.

    :param full: LagrangeBasis of kind FULL
    :returns: A[xi, zeta]
    :raises NonInteriorId: If either id has no column
    """
    if full.kind != FULL:
        raise InterpolationError('native inner products need a full basis')
    full.column_index(xi_id)
    j = full.column_index(zeta_id)
    return float(full.coefficients[full.centers.index_of(xi_id), j])


def theta_vs_coeff_norm(k, Upsilon):
    """
    Smallest positive eigenvalue of the projected kernel matrix and the
    spectral norm of the local Lagrange coefficient matrix.

    :param k: Surface spline kernel
    :param Upsilon: Footprint point set
    :returns: Tuple (theta, coeff_norm)
    :raises DegenerateFootprint: If no eigenvalue is positive
    """
    if not k.conditionally_positive:
        raise InterpolationError('theta is defined for surface splines only')
    if len(Upsilon) > _MAX_DENSE_FOOTPRINT:
        raise InterpolationError(
            f'footprint of {len(Upsilon)} points exceeds dense eigensolve cap'
        )
    system = assemble_collocation(k, Upsilon)
    phi = system.vandermonde.phi
    n = system.size
    if n <= phi.shape[1]:
        raise DegenerateFootprint(len(Upsilon))
    complement = np.eye(n) - phi @ scipy.linalg.solve(
        system.vandermonde.gram, phi.T, assume_a='pos'
    )
    projected = complement @ system.kernel_block @ complement
    eigenvalues = scipy.linalg.eigvalsh((projected + projected.T) / 2)
    threshold = _EIGEN_TOL * np.linalg.norm(system.kernel_block, 2)
    positive = eigenvalues[eigenvalues > threshold]
    if not len(positive):
        raise DegenerateFootprint(len(Upsilon))
    rhs = np.vstack([np.eye(n), np.zeros((len(system.matrix) - n, n))])
    solution = scipy.linalg.lu_solve(factorize(system), rhs)
    return float(positive[0]), float(np.linalg.norm(solution[:n], 2))


def write_basis(basis, fp):
    """
    Write a basis as text triplets ordered by ids.

    Kernel coefficients are "xi_id center_id coefficient" lines;
    polynomial coefficients are "xi_id poly j coefficient" lines.

    :param basis: LagrangeBasis
    :param fp: A writable text stream
    """
    fp.write(f'# kind {basis.kind} family {basis.kernel.family} '
             f'm {basis.kernel.m} d {basis.kernel.d}\n')
    for xi_id in sorted(int(i) for i in basis.column_ids):
        column = basis.column(xi_id)
        for center_id, value in sorted(
            zip(column.center_ids.tolist(), column.coefficients.tolist())
        ):
            fp.write(f'{xi_id} {center_id} {value:.17g}\n')
        for j, value in enumerate(column.polynomial.tolist()):
            fp.write(f'{xi_id} poly {j} {value:.17g}\n')


def _power_iteration(operator, start):
    v = start / np.linalg.norm(start)
    estimate = 0.0
    for _ in range(_POWER_ITERATIONS):
        w = operator(v)
        estimate = float(np.linalg.norm(w))
        if estimate == 0:
            break
        v = w / estimate
    return estimate


class InterpolationError(Exception):
    """General interpolation error."""
    pass


class SingularSystem(InterpolationError):
    """Collocation matrix factorization is singular."""

    def __init__(self, size, *args, **kwargs):
        """
        Create a singular system error.

        :param size: Order of the singular matrix
        """
        super().__init__(f'singular collocation system of size {size}',
                         *args, **kwargs)
        self.size = size


class NonInteriorId(InterpolationError):
    """Requested id has no Lagrange function in the basis."""

    def __init__(self, point_id, *args, **kwargs):
        """
        Create a non-interior id error.

        :param point_id: The offending id
        """
        super().__init__(f'id {point_id} is not an interior center',
                         *args, **kwargs)
        self.point_id = point_id


class DegenerateFootprint(InterpolationError):
    """Projected kernel matrix of a footprint has no positive eigenvalue."""

    def __init__(self, count, *args, **kwargs):
        """
        Create a degenerate footprint error.

        :param count: Number of points in the footprint
        """
        super().__init__(f'degenerate footprint of {count} point(s)',
                         *args, **kwargs)
        self.count = count
