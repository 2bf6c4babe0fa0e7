"""
Quadrature and (semi)norms over a domain and its boundary.

Functions are "evaluables": callables f(points, alpha) returning D^alpha f
at the rows of points, either as an (n,) array or as an (n, k) array
holding k functions at once. Expansion objects qualify.

Sobolev norms carry multinomial weights inside each seminorm and
binomial weights across orders:

    |u|^p_{W^k_p} = sum_{|alpha|=k} (k choose alpha) ||D^alpha u||^p_p
    ||u||^p_{W^k_p} = sum_{j<=k} (k choose j) |u|^p_{W^j_p}

At p = inf the norms are maxima of the derivative sup norms.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.spatial.distance

from .kernels import multi_indices, multinomial


INTERIOR_GRID = 'interior_grid'
BOUNDARY_ARCLENGTH = 'boundary_arclength'
NODE_CAP = 5000
_PAIR_CHUNK = 2_000_000
_logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    Nodes and weights of a quadrature rule.

    :param nodes: (n, d) array
    :param weights: (n,) positive weights
    :param resolution: Cell size used
    :param kind: INTERIOR_GRID or BOUNDARY_ARCLENGTH
    """
    nodes: np.ndarray
    weights: np.ndarray
    resolution: float
    kind: str

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True)
class NormSpec:
    """
    Integrability and smoothness of a norm.

    :param p: Exponent in [1, inf]
    :param sigma: Smoothness, nonnegative
    """
    p: float
    sigma: float = 0.0

    def __post_init__(self):
        if not self.p >= 1:
            raise UnsupportedNorm(f'p must be at least 1, got {self.p}')
        if self.sigma < 0:
            raise UnsupportedNorm(
                f'sigma must be nonnegative, got {self.sigma}'
            )
        if math.isinf(self.p) and self.delta:
            raise UnsupportedNorm(
                'fractional smoothness is not supported at p = inf'
            )

    @property
    def k(self):
        return math.floor(self.sigma)

    @property
    def delta(self):
        return self.sigma - self.k


def interior_quadrature(domain, resolution, offset=0.0):
    """
    Midpoint rule over grid cells whose center lies in the domain.

    :param domain: Domain
    :param resolution: Cell size, below diameter / 8
    :param offset: Shift applied to every cell center
    :raises EmptyQuadrature: If no cell center is inside
    """
    if not 0 < resolution < domain.diameter / 8:
        raise NormError(
            f'resolution must be in (0, diameter/8), got {resolution}'
        )
    axes = [
        lo + offset
        + (np.arange(math.ceil((hi - lo) / resolution - 1e-9)) + 0.5)
        * resolution
        for lo, hi in domain.bbox.T
    ]
    grid = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)
    grid = grid.reshape(-1, domain.dim)
    nodes = grid[domain.contains(grid)]
    if not len(nodes):
        raise EmptyQuadrature(domain.name)
    return QuadratureRule(
        nodes, np.full(len(nodes), resolution ** domain.dim),
        resolution, INTERIOR_GRID
    )


def boundary_quadrature(domain, resolution):
    """
    Arc-length midpoint rule on the domain boundary.

    In one dimension the rule is the counting measure on the endpoints.

    :raises UnsupportedDomainBoundary: If the domain has no boundary
    """
    if domain.boundary is None:
        raise UnsupportedDomainBoundary(domain.name)
    nodes, weights = domain.boundary.sample(resolution)
    return QuadratureRule(nodes, weights, resolution, BOUNDARY_ARCLENGTH)


def lp_norm_values(values, weights, p):
    """
    L_p norm of sampled values.

    Rows holding NaN are skipped.

    :param values: (n,) or (n, k) array
    :param weights: (n,) quadrature weights
    :param p: Exponent in [1, inf]
    :returns: Scalar or (k,) array
    """
    values, weights = _finite_rows(values, weights)
    magnitude = np.abs(values)
    if not len(magnitude):
        return np.zeros(values.shape[1:]) if values.ndim > 1 else 0.0
    if math.isinf(p):
        return np.max(magnitude, axis=0)
    return np.tensordot(weights, magnitude ** p, axes=1) ** (1 / p)


def lp_norm(f, quad, p):
    """
    L_p norm of an evaluable.

    :param f: Evaluable f(points, alpha)
    :param quad: QuadratureRule
    :param p: Exponent in [1, inf]; inf is the node maximum
    """
    return lp_norm_values(_evaluate(f, quad.nodes, None), quad.weights, p)


def sobolev_seminorm_values(derivatives, weights, k, p):
    """
    Integer Sobolev seminorm from sampled derivatives.

    :param derivatives: Mapping of every multi-index of order k to values
    :param weights: Quadrature weights
    :param k: Order
    :param p: Exponent
    """
    d = len(next(iter(derivatives)))
    terms = [
        (multinomial(alpha), lp_norm_values(derivatives[alpha], weights, p))
        for alpha in multi_indices(d, k)
    ]
    if math.isinf(p):
        return np.max([norm for _, norm in terms], axis=0)
    return sum(w * norm ** p for w, norm in terms) ** (1 / p)


def sobolev_seminorm(f, quad, k, p):
    """
    Integer Sobolev seminorm |f|_{W^k_p} with multinomial weights.

    :param f: Evaluable
    :param quad: QuadratureRule
    :param k: Order
    :param p: Exponent
    """
    return sobolev_seminorm_values(
        _derivatives(f, quad.nodes, k), quad.weights, k, p
    )


def sobolev_integer_norm(f, quad, k, p):
    """
    Integer Sobolev norm with binomial weights across orders.

    :param f: Evaluable
    :param quad: QuadratureRule
    :param k: Order
    :param p: Exponent; inf gives the C^k norm over the nodes
    """
    seminorms = [sobolev_seminorm(f, quad, j, p) for j in range(k + 1)]
    return combine_orders(seminorms, k, p)


def slobodeckij_seminorm_values(derivatives, quad, k, delta, p):
    """
    Slobodeckij seminorm from sampled derivatives of order k.

    Pairs closer than half the quadrature resolution are excluded.

    :param derivatives: Mapping of every multi-index of order k to values
    :param quad: QuadratureRule the values were sampled on
    :param delta: Fractional part in (0, 1)
    :param p: Finite exponent
    :raises NodeCapExceeded: Above NODE_CAP nodes
    """
    if not 0 < delta < 1:
        raise UnsupportedNorm(f'delta must be in (0, 1), got {delta}')
    if math.isinf(p):
        raise UnsupportedNorm('fractional seminorms need finite p')
    d = quad.nodes.shape[1]
    keep = np.ones(len(quad), dtype=bool)
    for values in derivatives.values():
        keep &= _finite_mask(values)
    _report_skipped(keep)
    nodes, weights = quad.nodes[keep], quad.weights[keep]
    if len(nodes) > NODE_CAP:
        raise NodeCapExceeded(len(nodes))
    exponent = d + p * delta
    total = 0.0
    for alpha in multi_indices(d, k):
        values = derivatives[alpha][keep]
        flat = values.reshape(len(values), -1)
        chunk = max(1, _PAIR_CHUNK // max(len(nodes) * flat.shape[1], 1))
        for lo in range(0, len(nodes), chunk):
            dist = scipy.spatial.distance.cdist(nodes[lo:lo + chunk], nodes)
            mask = dist >= quad.resolution / 2
            kernel = np.where(
                mask, np.outer(weights[lo:lo + chunk], weights), 0.0
            ) / np.where(mask, dist, 1.0) ** exponent
            diff = np.abs(flat[lo:lo + chunk, None, :] - flat[None, :, :]) ** p
            total = total + np.einsum('ij,ijk->k', kernel, diff)
    result = total ** (1 / p)
    return result if values.ndim > 1 else float(result[0])


def slobodeckij_seminorm(f, quad, k, delta, p):
    """
    Slobodeckij seminorm: sum over |alpha| = k of the double integral of
    |D^alpha f(x) - D^alpha f(y)|^p / |x - y|^(d + p delta).

    :param f: Evaluable
    :param quad: QuadratureRule, at most NODE_CAP nodes
    :param k: Integer order of the derivatives
    :param delta: Fractional part in (0, 1)
    :param p: Finite exponent
    """
    return slobodeckij_seminorm_values(
        {alpha: _evaluate(f, quad.nodes, alpha)
         for alpha in multi_indices(quad.nodes.shape[1], k)},
        quad, k, delta, p
    )


def sobolev_norm(f, quad, sigma, p):
    """
    Sobolev norm of integer or fractional smoothness.

    For sigma = k + delta with 0 < delta < 1,
    ||f||^p = ||f||^p_{W^k_p} + |f|^p_{W^sigma_p}.

    :raises UnsupportedNorm: For fractional sigma at p = inf
    """
    spec = NormSpec(p, sigma)
    integer = sobolev_integer_norm(f, quad, spec.k, p)
    if not spec.delta:
        return integer
    fractional = slobodeckij_seminorm(f, quad, spec.k, spec.delta, p)
    return (integer ** p + fractional ** p) ** (1 / p)


def boundary_lp_norm(f, domain, p, resolution):
    """
    L_p norm over the domain boundary.

    :param f: Evaluable
    :param domain: Domain with a boundary
    :param p: Exponent
    :param resolution: Largest node spacing along the boundary
    """
    return lp_norm(f, boundary_quadrature(domain, resolution), p)


def combine_orders(seminorms, k, p):
    """
    Binomially weighted Sobolev norm from seminorms of orders 0..k.

    :param seminorms: Sequence of k + 1 seminorms (scalars or arrays)
    """
    if math.isinf(p):
        return np.max(np.array(seminorms), axis=0)
    return sum(
        math.comb(k, j) * s ** p for j, s in enumerate(seminorms)
    ) ** (1 / p)


def _derivatives(f, nodes, k):
    return {
        alpha: _evaluate(f, nodes, alpha)
        for alpha in multi_indices(nodes.shape[1], k)
    }


def _evaluate(f, nodes, alpha):
    if alpha is None:
        alpha = (0,) * nodes.shape[1]
    return np.asarray(f(nodes, tuple(alpha)), dtype=float)


def _finite_mask(values):
    finite = np.isfinite(values)
    return finite if finite.ndim == 1 else np.all(finite, axis=1)


def _finite_rows(values, weights):
    values = np.asarray(values, dtype=float)
    keep = _finite_mask(values)
    _report_skipped(keep)
    return values[keep], np.asarray(weights)[keep]


def _report_skipped(keep):
    skipped = len(keep) - int(np.sum(keep))
    if skipped:
        _logger.warning('skipped %d singular quadrature node(s)', skipped)


class NormError(Exception):
    """General norm error."""
    pass


class EmptyQuadrature(NormError):
    """Quadrature rule has no nodes."""

    def __init__(self, domain_name, *args, **kwargs):
        """
        Create an empty quadrature error.

        :param domain_name: Name of the domain
        """
        super().__init__(
            f'no quadrature nodes in {domain_name}', *args, **kwargs
        )
        self.domain_name = domain_name


class UnsupportedNorm(NormError):
    """Norm parameters outside the supported range."""
    pass


class UnsupportedDomainBoundary(NormError):
    """Domain has no boundary parametrization."""

    def __init__(self, domain_name, *args, **kwargs):
        """
        Create an unsupported boundary error.

        :param domain_name: Name of the domain
        """
        super().__init__(
            f'domain {domain_name} has no boundary', *args, **kwargs
        )
        self.domain_name = domain_name


class NodeCapExceeded(NormError):
    """Too many nodes for a double-sum seminorm."""

    def __init__(self, count, *args, **kwargs):
        """
        Create a node cap error.

        :param count: Number of nodes requested
        """
        super().__init__(
            f'{count} nodes exceed the cap of {NODE_CAP}', *args, **kwargs
        )
        self.count = count
