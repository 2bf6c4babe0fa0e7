"""
Matérn and surface-spline kernels, their derivatives, and polynomial
side-condition machinery.

Kernels are radial, F(|x|). Derivatives use the radial recursion
g_k = ((1/r) d/dr)^k F, combined per multi-index alpha as

    D^alpha F(x) = sum over gamma <= alpha/2 of
        prod_i alpha_i! / (gamma_i! (alpha_i - 2 gamma_i)! 2^gamma_i)
        * x_i^(alpha_i - 2 gamma_i) * g_(|alpha| - |gamma|)(|x|)
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg
import scipy.special


MATERN = 'matern'
SURFACE_SPLINE = 'surface_spline'
FAMILIES = (MATERN, SURFACE_SPLINE)
_MAX_BESSEL_ORDER = 16
_UNISOLVENCE_TOL = 1e-12
_logger = logging.getLogger(__name__)


def bessel_k(nu, r):
    """
    Modified Bessel function of the second kind.

    :param nu: Order, a nonnegative integer or half-integer
    :param r: Positive argument, scalar or array
    :returns: K_nu(r), capped at the largest finite float as r -> 0
    :raises KernelDomainError: If any r <= 0
    :raises UnsupportedOrder: If nu is not a supported order
    """
    if nu < 0 or nu > _MAX_BESSEL_ORDER or not float(2 * nu).is_integer():
        raise UnsupportedOrder(nu)
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise KernelDomainError(f'bessel_k requires r > 0, got {r.min()}')
    with np.errstate(over='ignore'):
        value = np.minimum(scipy.special.kv(nu, r), np.finfo(float).max)
    return float(value) if value.ndim == 0 else value


def default_sign(m, d):
    """
    Sign making the surface spline quadratic form positive on
    coefficients annihilating polynomials of degree below m.

    :param m: Kernel order
    :param d: Spatial dimension
    """
    if d % 2:
        return (-1) ** math.ceil(m - d / 2)
    return (-1) ** (m - d // 2 + 1)


@dataclass(frozen=True)
class Kernel:
    """
    A radial kernel of order m in d dimensions.

    :param family: MATERN or SURFACE_SPLINE
    :param m: Order, with 2m > d
    :param d: Spatial dimension
    :param sign: Multiplier +1 or -1 (surface splines)
    :param scale: Positive multiplier
    """
    family: str
    m: int
    d: int
    sign: int = 1
    scale: float = 1.0

    @classmethod
    def matern(cls, m, d, scale=1.0):
        """Create a Matérn kernel r^nu K_nu(r) with nu = m - d/2."""
        return cls(MATERN, m, d, 1, scale)

    @classmethod
    def surface_spline(cls, m, d, sign=None, scale=1.0):
        """
        Create a surface spline |x|^(2m-d), times log|x| for even d.

        :param sign: Override of the conditionally positive sign
        """
        return cls(
            SURFACE_SPLINE, m, d,
            default_sign(m, d) if sign is None else sign,
            scale
        )

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidKernel(f'unknown kernel family {self.family}')
        if self.m < 1 or self.d < 1 or 2 * self.m <= self.d:
            raise InvalidKernel(
                f'kernel order requires 2m > d, got m={self.m} d={self.d}'
            )
        if self.sign not in (1, -1):
            raise InvalidKernel(
                f'kernel sign must be +1 or -1, got {self.sign}'
            )
        if not self.scale > 0:
            raise InvalidKernel(
                f'kernel scale must be positive, got {self.scale}'
            )

    @property
    def nu(self):
        return self.m - self.d / 2

    @property
    def beta(self):
        return 2 * self.m - self.d

    @property
    def conditionally_positive(self):
        return self.family == SURFACE_SPLINE

    def polynomial_basis(self):
        """Side-condition polynomials, or None for Matérn kernels."""
        if self.conditionally_positive:
            return polynomial_basis(self.m, self.d)
        return None

    def radial(self, r):
        """
        Evaluate F at radii r >= 0.

        :param r: Array of radii
        """
        r = np.asarray(r, dtype=float)
        value = np.empty_like(r)
        zero = r == 0
        value[zero] = self._radial_at_zero(0)
        value[~zero] = self._radial_derivatives(r[~zero], 0)[0]
        return value

    def __call__(self, x):
        """Evaluate at the rows of an (n, d) array of offsets."""
        return self.radial(np.linalg.norm(_as_offsets(x, self.d), axis=1))

    def derivative(self, x, alpha, singular='raise'):
        """
        Evaluate D^alpha of the kernel at the rows of an (n, d) array.

        :param x: Offsets x = point - center
        :param alpha: Multi-index of length d
        :param singular: 'raise' or 'nan' for offsets at the origin
                         where the derivative is unbounded
        :raises KernelSingularity: At x = 0 with |alpha| >= 2m - d
        """
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.d or min(alpha) < 0:
            raise InvalidKernel(f'bad multi-index {alpha} for d={self.d}')
        x = _as_offsets(x, self.d)
        order = sum(alpha)
        if order == 0:
            return self(x)
        r = np.linalg.norm(x, axis=1)
        zero = r == 0
        value = np.zeros(len(x))
        if np.any(zero):
            if order >= self.beta:
                if singular == 'raise':
                    raise KernelSingularity(alpha)
                value[zero] = np.nan
            elif all(a % 2 == 0 for a in alpha):
                half = tuple(a // 2 for a in alpha)
                value[zero] = (
                    _hermite_coefficient(alpha, half)
                    * self._radial_at_zero(order // 2)
                )
        if np.any(~zero):
            xs, rs = x[~zero], r[~zero]
            g = self._radial_derivatives(rs, order)
            total = np.zeros(len(rs))
            ranges = (range(a // 2 + 1) for a in alpha)
            for gamma in itertools.product(*ranges):
                term = _hermite_coefficient(alpha, gamma)
                term = term * g[order - sum(gamma)]
                for i, (a, c) in enumerate(zip(alpha, gamma)):
                    if a - 2 * c:
                        term = term * xs[:, i] ** (a - 2 * c)
                total += term
            value[~zero] = total
        return value

    def _radial_at_zero(self, k):
        if self.family == MATERN:
            mu = self.nu - k
            if mu <= 0:
                raise KernelSingularity(k)
            return (-1) ** k * self.scale * 2 ** (mu - 1) * math.gamma(mu)
        if self.beta - 2 * k <= 0:
            raise KernelSingularity(k)
        return 0.0

    def _radial_derivatives(self, r, order):
        """g_0 .. g_order at radii r > 0."""
        c = self.sign * self.scale
        g = []
        if self.family == MATERN:
            for k in range(order + 1):
                mu = self.nu - k
                bessel = bessel_k(abs(mu), r)
                g.append((-1) ** k * self.scale * r ** mu * bessel)
        elif self.d % 2:
            for k in range(order + 1):
                g.append(c * r ** (self.beta - 2 * k))
                c *= self.beta - 2 * k
        else:
            a, b = c, 0.0
            log_r = np.log(r)
            for k in range(order + 1):
                g.append(r ** (self.beta - 2 * k) * (a * log_r + b))
                gamma = self.beta - 2 * k
                a, b = gamma * a, gamma * b + a
        return [np.asarray(v, dtype=float) for v in g]


def eval_kernel(k, x):
    """
    Evaluate a kernel at one offset.

    :param k: Kernel
    :param x: d-vector (or scalar for d = 1)
    :returns: Real value
    """
    return float(k(np.reshape(np.asarray(x, dtype=float), (1, k.d)))[0])


def eval_kernel_derivative(k, alpha, x):
    """
    Evaluate D^alpha of a kernel at one offset.

    :param k: Kernel
    :param alpha: Multi-index
    :param x: d-vector (or scalar for d = 1)
    :raises KernelSingularity: At a singular point
    """
    offsets = np.reshape(np.asarray(x, dtype=float), (1, k.d))
    return float(k.derivative(offsets, alpha)[0])


def kernel_matrix(k, points, centers, alpha=None, singular='raise'):
    """
    Matrix of D^alpha k(x - zeta) for rows x in points, columns zeta.

    :param k: Kernel
    :param points: (n, d) evaluation points
    :param centers: (M, d) centers
    :param alpha: Multi-index or None for values
    :param singular: Passed to Kernel.derivative
    """
    offsets = points[:, None, :] - centers[None, :, :]
    flat = offsets.reshape(-1, k.d)
    if alpha is None or not any(alpha):
        values = k(flat)
    else:
        values = k.derivative(flat, alpha, singular=singular)
    return values.reshape(len(points), len(centers))


def multi_indices(d, order):
    """
    All multi-indices of dimension d and total degree order, x-major.

    :returns: List of tuples in reverse lexicographic order
    """
    return sorted(
        (e for e in itertools.product(range(order + 1), repeat=d)
         if sum(e) == order),
        reverse=True
    )


def multinomial(alpha):
    """|alpha|! / prod alpha_i!"""
    result = math.factorial(sum(alpha))
    for a in alpha:
        result //= math.factorial(a)
    return result


@dataclass(frozen=True)
class PolynomialBasis:
    """
    Monomials of total degree at most degree, in graded order.

    :param d: Spatial dimension
    :param degree: Largest total degree
    :param exponents: Exponent multi-indices
    """
    d: int
    degree: int
    exponents: Tuple[Tuple[int, ...], ...]

    @property
    def N(self):
        return len(self.exponents)

    def evaluate(self, points):
        """(n, N) matrix of monomial values."""
        return self.derivative(points, (0,) * self.d)

    def derivative(self, points, alpha):
        """
        (n, N) matrix of D^alpha of each monomial.

        :param points: (n, d) array
        :param alpha: Multi-index
        """
        points = _as_offsets(points, self.d)
        result = np.zeros((len(points), self.N))
        for j, e in enumerate(self.exponents):
            if any(a > p for a, p in zip(alpha, e)):
                continue
            column = np.ones(len(points))
            for i, (p, a) in enumerate(zip(e, alpha)):
                column *= math.perm(p, a)
                if p - a:
                    column = column * points[:, i] ** (p - a)
            result[:, j] = column
        return result


@dataclass(frozen=True, eq=False)
class VandermondeSystem:
    """
    Polynomial evaluation matrix and its Gram matrix.

    :param phi: (n, N) matrix of p_j at the points
    :param gram: phi^T phi
    :param gram_inverse_norm: Spectral norm of the inverse Gram matrix
    """
    phi: np.ndarray
    gram: np.ndarray
    gram_inverse_norm: float


def polynomial_basis(m, d):
    """
    Monomial basis of polynomials of degree at most m - 1.

    :param m: Kernel order, at least 1
    :param d: Spatial dimension, at least 1
    """
    if m < 1 or d < 1:
        raise InvalidKernel(
            f'polynomial basis requires m, d >= 1, got {m}, {d}'
        )
    exponents = tuple(
        e for degree in range(m) for e in multi_indices(d, degree)
    )
    return PolynomialBasis(d, m - 1, exponents)


def vandermonde(X, basis):
    """
    Build the Vandermonde system of a point set.

    :param X: PointSet or (n, d) array; duplicates allowed
    :param basis: PolynomialBasis
    :raises NonUnisolventPointSet: If the Gram matrix is numerically
                                   singular
    """
    points = X.points if hasattr(X, 'points') else X
    phi = basis.evaluate(np.asarray(points, dtype=float))
    gram = phi.T @ phi
    eigenvalues = scipy.linalg.eigvalsh(gram)
    if eigenvalues[0] <= _UNISOLVENCE_TOL * eigenvalues[-1]:
        raise NonUnisolventPointSet(len(phi), basis.degree)
    return VandermondeSystem(phi, gram, float(1 / eigenvalues[0]))


def gram_pattern(d, radius):
    """
    Fixed 5-per-axis grid pattern inside the ball of the given radius.

    :param d: Spatial dimension
    :param radius: Ball radius
    :returns: (5^d, d) array
    """
    axis = np.linspace(-1, 1, 5) / math.sqrt(d)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing='ij'), axis=-1)
    return radius * grid.reshape(-1, d)


def _hermite_coefficient(alpha, gamma):
    result = 1
    for a, c in zip(alpha, gamma):
        result *= math.factorial(a) / (
            math.factorial(c) * math.factorial(a - 2 * c) * 2 ** c
        )
    return result


def _as_offsets(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and d == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] != d:
        raise InvalidKernel(f'expected offsets of dimension {d}')
    return x


class KernelError(Exception):
    """General kernel error."""
    pass


class InvalidKernel(KernelError):
    """Kernel parameters or arguments are invalid."""
    pass


class KernelDomainError(KernelError):
    """Special function argument outside its domain."""
    pass


class UnsupportedOrder(KernelError):
    """Bessel order outside the supported set."""

    def __init__(self, nu, *args, **kwargs):
        """
        Create an unsupported order error.

        :param nu: The requested order
        """
        super().__init__(f'unsupported Bessel order {nu}', *args, **kwargs)
        self.nu = nu


class KernelSingularity(KernelError):
    """Kernel derivative is unbounded at the requested point."""

    def __init__(self, order, *args, **kwargs):
        """
        Create a kernel singularity error.

        :param order: The derivative multi-index or radial order
        """
        super().__init__(
            f'kernel derivative singularity for {order}', *args, **kwargs
        )
        self.order = order


class NonUnisolventPointSet(KernelError):
    """Point set does not determine polynomials of the required degree."""

    def __init__(self, count, degree, *args, **kwargs):
        """
        Create a non-unisolvent error.

        :param count: Number of points
        :param degree: Polynomial degree
        """
        super().__init__(
            f'non-unisolvent point set: {count} point(s) for degree {degree}',
            *args, **kwargs
        )
        self.count = count
        self.degree = degree
