"""
Inequality studies over sweeps of fill distance.

Each study builds one Level per target fill distance (centers, their
extension, bases and quadrature) and measures ratios over random and
unit coefficient vectors. Cell functions return CellRecord lists in a
fixed order.
"""
import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .. import geometry, norms
from ..interpolation import (
    FULL, TRUNCATED, InterpolationError, LagrangeBasis, LagrangeColumn,
    local_basis, solve_full_lagrange, solve_local_lagrange,
    theta_vs_coeff_norm, truncate_and_project
)
from ..kernels import (
    MATERN, Kernel, KernelError, gram_pattern, multi_indices,
    polynomial_basis, vandermonde
)
from ..models import (
    BERNSTEIN, DECAY, GRAM, NIKOLSKII, STABILITY, THETA, TRACE,
    TRACE_SPLIT, TRUNCATION, CellRecord
)


DECAY_BIN_WIDTH = 0.5
DECAY_MIN_BINS = 4
DECAY_WINDOW = (2.0, 10.0)
DECAY_MIN_SPAN = 3.0
DECAY_SAMPLE_STEP = 0.25
DECAY_MIN_R2 = 0.9
FRACTIONAL_NODES = 1500
_DECAY_CENTERS = 8
_SAMPLE_CENTERS = 5
_MAX_FOOTPRINT = 500
_RANGE_TOL = 1e-12
_logger = logging.getLogger(__name__)

DecayFit = namedtuple('DecayFit', ['slope', 'r_squared'])


def make_kernel(spec, d):
    """
    Build a kernel from a KernelSpec.

    :param spec: KernelSpec
    :param d: Spatial dimension
    """
    if spec.family == MATERN:
        return Kernel.matern(spec.m, d)
    return Kernel.surface_spline(spec.m, d)


@dataclass(eq=False)
class Level:
    """
    Everything measured at one target fill distance.

    :param xi: Interior centers
    :param centers: Extended centers restricted to the extended domain
    :param quadrature: Interior rule offset from the generation grid
    :param boundary: Boundary rule at the same resolution, or None
    """
    index: int
    cfg: object
    domain: geometry.Domain
    kernel: Kernel
    xi: geometry.PointSet
    metrics: geometry.PointSetMetrics
    centers: geometry.PointSet
    quadrature: norms.QuadratureRule
    boundary: norms.QuadratureRule = None
    _bases: dict = field(default_factory=dict, repr=False)
    _synthesis: dict = field(default_factory=dict, repr=False)
    _fractional: norms.QuadratureRule = field(default=None, repr=False)

    @property
    def h(self):
        return self.metrics.fill_distance

    @property
    def q(self):
        return self.metrics.separation_radius

    @property
    def d(self):
        return self.domain.dim

    @property
    def quadrature_ok(self):
        return self.quadrature.resolution <= self.q / 3 * (1 + _RANGE_TOL)

    def footprint_cfg(self, K):
        return geometry.FootprintConfig(K, self.h, self.cfg.log_floor)

    def basis(self, kind):
        """
        Get the full basis or the local basis at the configured K.

        :param kind: FULL or LOCAL
        """
        if kind not in self._bases:
            if kind == FULL:
                self._bases[kind] = solve_full_lagrange(
                    self.kernel, self.centers, self.xi.ids
                )
            else:
                self._bases[kind] = local_basis(
                    self.kernel, self.centers, self.xi.ids,
                    self.footprint_cfg(self.cfg.local_K)
                )
        return self._bases[kind]

    def points(self, where):
        """
        Evaluation points.

        :param where: 'nodes' (interior quadrature), 'sup' (nodes and
                      centers) or 'boundary'
        """
        if where == 'nodes':
            return self.quadrature.nodes
        if where == 'boundary':
            return self.boundary.nodes
        return np.vstack([self.quadrature.nodes, self.xi.points])

    def synthesis(self, kind, where, alpha=None):
        """Cached synthesis matrix of a basis; singular entries are NaN."""
        key = (kind, where, alpha)
        if key not in self._synthesis:
            self._synthesis[key] = self.basis(kind).synthesis_matrix(
                self.points(where), alpha, singular='nan'
            )
        return self._synthesis[key]

    def sample(self, kind, where, draws, alpha=None):
        """Values of every draw: (points x draws)."""
        return self.synthesis(kind, where, alpha) @ draws

    def weights(self, where):
        if where == 'nodes':
            return self.quadrature.weights
        if where == 'boundary':
            return self.boundary.weights
        return np.ones(len(self.points(where)))

    def fractional_rule(self):
        """
        Interior rule for fractional double sums, coarsened until it has
        at most FRACTIONAL_NODES nodes.
        """
        if self._fractional is None:
            rule = self.quadrature
            while len(rule) > FRACTIONAL_NODES:
                resolution = rule.resolution * 1.05 * (
                    len(rule) / FRACTIONAL_NODES
                ) ** (1 / self.d)
                rule = norms.interior_quadrature(
                    self.domain, resolution, offset=resolution / 7
                )
            if rule is not self.quadrature:
                _logger.info(
                    'level %d: fractional seminorms on %d nodes at %.3g',
                    self.index, len(rule), rule.resolution
                )
            self._fractional = rule
        return self._fractional

    def deepest_centers(self, count):
        """Column positions of the centers farthest from the boundary."""
        depth = self.domain.boundary_distance(self.xi.points)
        return np.argsort(-depth, kind='stable')[:count], depth

    def record(self, study, kind, **kwargs):
        return CellRecord(
            study=study, kind=kind, metrics=self.metrics, **kwargs
        )


def prepare_level(cfg, domain, kernel, index):
    """
    Generate centers and quadrature for one entry of cfg.h_levels.

    :param cfg: StudyConfig
    :param domain: Domain
    :param kernel: Kernel
    :param index: Position in cfg.h_levels
    :returns: Level
    """
    xi = geometry.generate_quasi_uniform(
        domain, cfg.h_levels[index], cfg.seed + index
    )
    metrics = geometry.point_set_metrics(xi, domain)
    _logger.info(
        'level %d: N=%d h=%.4g q=%.4g rho=%.3g probe=%.3g',
        index, len(xi), metrics.fill_distance, metrics.separation_radius,
        metrics.mesh_ratio, metrics.probe_resolution
    )
    extended = geometry.extend_grid(
        xi, domain, metrics.fill_distance, cfg.extension_margin
    )
    centers = geometry.restrict_to_tilde(
        extended, domain, cfg.extension_margin
    )
    resolution = cfg.quadrature_fraction * metrics.fill_distance
    quadrature = norms.interior_quadrature(
        domain, resolution, offset=resolution / 7
    )
    boundary = (
        norms.boundary_quadrature(domain, resolution)
        if domain.boundary is not None else None
    )
    return Level(
        index, cfg, domain, kernel, xi, metrics, centers, quadrature, boundary
    )


def coefficient_draws(cfg, count):
    """
    Standard normal coefficient vectors followed by every unit vector.

    :param cfg: StudyConfig
    :param count: Number of basis columns
    :returns: (count, n_random_coeff + count) array
    """
    rng = np.random.default_rng(cfg.seed)
    return np.hstack([
        rng.standard_normal((count, cfg.n_random_coeff)), np.eye(count)
    ])


def fit_decay(distances, values, lower, upper, width=DECAY_BIN_WIDTH):
    """
    Fit ln of the binned envelope of |values| against distance.

    The envelope of a bin is the largest |value| at that distance or
    beyond, so it is nonincreasing across the window.

    :param distances: Distances in units of h
    :param values: Values at those distances
    :param lower: Window start
    :param upper: Window end
    :param width: Bin width
    :returns: DecayFit or None if fewer than DECAY_MIN_BINS bins are usable
    """
    distances = np.asarray(distances, dtype=float)
    magnitude = np.abs(np.asarray(values, dtype=float))
    edges = np.arange(lower, upper + _RANGE_TOL, width)
    if len(edges) < DECAY_MIN_BINS + 1:
        return None
    bins = np.digitize(distances, edges) - 1
    usable = (bins >= 0) & (bins < len(edges) - 1) & (magnitude > 0)
    envelope = np.zeros(len(edges) - 1)
    np.maximum.at(envelope, bins[usable], magnitude[usable])
    envelope = np.maximum.accumulate(envelope[::-1])[::-1]
    filled = envelope > 0
    if np.sum(filled) < DECAY_MIN_BINS:
        return None
    x = edges[:-1][filled] + width / 2
    y = np.log(envelope[filled])
    slope, intercept = np.polyfit(x, y, 1)
    residual = np.sum((y - (slope * x + intercept)) ** 2)
    total = np.sum((y - np.mean(y)) ** 2)
    quality = float(1 - residual / total) if total else 1.0
    return DecayFit(float(slope), quality)


def decay_offsets(d, radius, step=DECAY_SAMPLE_STEP):
    """
    Grid offsets in units of h within a ball around the origin.

    :param d: Spatial dimension
    :param radius: Ball radius in units of h
    :param step: Grid spacing in units of h
    :returns: (n, d) array of offsets
    """
    axis = np.arange(-radius, radius + _RANGE_TOL, step)
    grid = np.stack(np.meshgrid(*[axis] * d, indexing='ij'), axis=-1)
    grid = grid.reshape(-1, d)
    return grid[np.linalg.norm(grid, axis=1) <= radius + _RANGE_TOL]


def decay_cells(level):
    """
    Fitted exponential decay of Lagrange functions and coefficients.

    Only the sampled columns are evaluated, on a grid of spacing
    DECAY_SAMPLE_STEP * h inside each center's fitting window.
    """
    basis = level.basis(FULL)
    order, depth = level.deepest_centers(_DECAY_CENTERS)
    offsets = decay_offsets(level.d, DECAY_WINDOW[1])
    radii = np.linalg.norm(offsets, axis=1)
    fits = {'pointwise': [], 'coefficient': []}
    for j in order:
        upper = min(DECAY_WINDOW[1], depth[j] / level.h)
        if upper - DECAY_WINDOW[0] < DECAY_MIN_SPAN:
            continue
        xi_id = int(level.xi.ids[j])
        center = level.xi.points[j]
        inside = radii <= upper
        values = basis.subset([xi_id]).synthesis_matrix(
            center + offsets[inside] * level.h
        )[:, 0]
        pointwise = fit_decay(
            radii[inside], values, DECAY_WINDOW[0], upper
        )
        coefficient = fit_decay(
            np.linalg.norm(level.centers.points - center, axis=1) / level.h,
            basis.dense_column(xi_id), DECAY_WINDOW[0], upper
        )
        _logger.debug(
            'decay at %d: pointwise %s coefficient %s',
            xi_id, pointwise, coefficient
        )
        if pointwise:
            fits['pointwise'].append(pointwise)
        if coefficient:
            fits['coefficient'].append(coefficient)
    records = []
    for kind, kind_fits in fits.items():
        if not kind_fits:
            records.append(level.record(
                DECAY, kind, warn='insufficient distance bins'
            ))
            continue
        slopes = np.array([f.slope for f in kind_fits])
        fit_quality = np.array([f.r_squared for f in kind_fits])
        warn = _join_warnings(
            basis.warnings,
            f'only {len(kind_fits)} usable centers'
            if len(kind_fits) < 5 else '',
            f'min R^2 {np.min(fit_quality):.3g}'
            if np.min(fit_quality) < DECAY_MIN_R2 else ''
        )
        records.append(level.record(
            DECAY, kind,
            ratio_min=float(np.min(-slopes)),
            ratio_max=float(np.max(-slopes)),
            slope=float(np.mean(slopes)),
            resid=float(np.mean(fit_quality)),
            warn=warn
        ))
    return records


def stability_cells(level):
    """Riesz-type stability ratios and Nikolskii ratios per basis kind."""
    cfg = level.cfg
    records = []
    for kind in cfg.basis_kinds:
        try:
            basis = level.basis(kind)
        except (KernelError, InterpolationError) as ex:
            records.extend(_skip_all(level, STABILITY, kind, cfg.p_values, ex))
            continue
        if not level.quadrature_ok:
            records.extend(_skip_all(
                level, STABILITY, kind, cfg.p_values,
                'quadrature too coarse for q'
            ))
            continue
        draws = coefficient_draws(cfg, len(basis))
        for p in cfg.p_values:
            ratios = (
                level.q ** (-level.d / p) * _lp(level, kind, draws, p)
                / np.linalg.norm(draws, ord=p, axis=0)
            )
            records.append(_ratio_record(
                level, STABILITY, kind, ratios, basis, p=p
            ))
        for r, p in cfg.nikolskii_pairs:
            exponent = level.d * max(1 / r - 1 / p, 0)
            ratios = (
                _lp(level, kind, draws, p) * level.q ** exponent
                / _lp(level, kind, draws, r)
            )
            records.append(_ratio_record(
                level, NIKOLSKII, f'{kind}:r={_format_exponent(r)}',
                ratios, basis, p=p
            ))
    return records


def bernstein_cells(level):
    """Inverse inequality ratios h^sigma ||s||_W / ||s||_L and synthesis."""
    cfg = level.cfg
    m, d = level.kernel.m, level.d
    records = []
    for kind in cfg.basis_kinds:
        try:
            basis = level.basis(kind)
        except (KernelError, InterpolationError) as ex:
            for p in cfg.p_values:
                for sigma in cfg.sigma_values:
                    records.append(level.record(
                        BERNSTEIN, kind, p=p, sigma=sigma, warn=str(ex)
                    ))
            continue
        draws = coefficient_draws(cfg, len(basis))
        for p in cfg.p_values:
            for sigma in cfg.sigma_values:
                reason = _bernstein_skip_reason(level, m, d, p, sigma)
                if reason:
                    for cell_kind in (kind, f'{kind}:synthesis'):
                        records.append(level.record(
                            BERNSTEIN, cell_kind, p=p, sigma=sigma, warn=reason
                        ))
                    continue
                strong = _sobolev(level, kind, draws, sigma, p)
                weak = _lp(level, kind, draws, p)
                cells = [
                    _ratio_record(
                        level, BERNSTEIN, kind,
                        strong * level.h ** sigma / weak,
                        basis, p=p, sigma=sigma
                    ),
                    _ratio_record(
                        level, BERNSTEIN, f'{kind}:synthesis',
                        strong * level.h ** (sigma - d / p)
                        / np.linalg.norm(draws, ord=p, axis=0),
                        basis, p=p, sigma=sigma
                    ),
                ]
                coarse = level.fractional_rule() is not level.quadrature
                if sigma % 1 and coarse:
                    for cell in cells:
                        cell.warn = _join_warnings(
                            cell.warn, 'fractional part on coarse rule'
                        )
                records.extend(cells)
    return records


def trace_cells(level):
    """Boundary-to-interior L_p ratios and the h-balanced trace split."""
    cfg = level.cfg
    records = []
    if level.boundary is None:
        raise norms.UnsupportedDomainBoundary(level.domain.name)
    for kind in cfg.basis_kinds:
        try:
            basis = level.basis(kind)
        except (KernelError, InterpolationError) as ex:
            records.extend(_skip_all(level, TRACE, kind, cfg.p_values, ex))
            continue
        draws = coefficient_draws(cfg, len(basis))
        boundary_values = level.sample(kind, 'boundary', draws)
        for p in cfg.p_values:
            on_boundary = norms.lp_norm_values(
                boundary_values, level.boundary.weights, p
            )
            if math.isinf(p):
                interior = np.maximum(
                    _lp(level, kind, draws, p),
                    np.max(np.abs(boundary_values), axis=0)
                )
                ratios = on_boundary / interior
            else:
                ratios = level.h ** (1 / p) * on_boundary / _lp(
                    level, kind, draws, p
                )
            records.append(
                _ratio_record(level, TRACE, kind, ratios, basis, p=p)
            )
            if 1 < p < math.inf:
                w1 = _sobolev(level, kind, draws, 1, p)
                split = on_boundary ** p / (
                    _lp(level, kind, draws, p) ** p / level.h
                    + level.h ** (p - 1) * w1 ** p
                )
                records.append(_ratio_record(
                    level, TRACE_SPLIT, kind, split, basis, p=p
                ))
    return records


def truncation_cells(level):
    """Tail mass and truncated or local versus full Lagrange functions."""
    cfg = level.cfg
    full = level.basis(FULL)
    order, _ = level.deepest_centers(_SAMPLE_CENTERS)
    kinds = [
        'tail', 'truncated_linf', 'local_linf', 'local_truncated_linf',
        'truncated_w21', 'local_w21'
    ]
    if full.poly_basis is not None:
        kinds.append('projection_l2')
    sup_points = level.points('sup')
    records = []
    for K in cfg.K_values:
        fp_cfg = level.footprint_cfg(K)
        measured = {kind: [] for kind in kinds}
        failures = 0
        for j in order:
            xi_id = int(level.xi.ids[j])
            upsilon = geometry.footprint(xi_id, level.centers, fp_cfg)
            try:
                truncated = truncate_and_project(full, xi_id, upsilon)
                local = solve_local_lagrange(level.kernel, upsilon, xi_id)
            except (KernelError, InterpolationError) as ex:
                _logger.warning('footprint of %s at K=%s: %s', xi_id, K, ex)
                failures += 1
                continue
            column = full.column(xi_id)
            differences = LagrangeBasis.from_columns(
                TRUNCATED, level.kernel, level.centers, [
                    _difference(column, truncated),
                    _difference(column, local),
                    _difference(truncated, local),
                ]
            )
            sup = np.max(
                np.abs(differences.synthesis_matrix(sup_points)), axis=0
            )
            w21 = _sobolev_of_basis(level, differences, 1, 2)
            measured['tail'].append(truncated.tail_mass)
            measured['truncated_linf'].append(sup[0])
            measured['local_linf'].append(sup[1])
            measured['local_truncated_linf'].append(sup[2])
            measured['truncated_w21'].append(w21[0])
            measured['local_w21'].append(w21[1])
            if 'projection_l2' in measured:
                restricted = full.dense_column(xi_id)[
                    level.centers.index_of(upsilon.ids)
                ]
                measured['projection_l2'].append(
                    np.linalg.norm(restricted - truncated.coefficients)
                )
        for kind in kinds:
            p = {'tail': 1.0, 'truncated_w21': 2.0, 'local_w21': 2.0,
                 'projection_l2': 2.0}.get(kind, math.inf)
            values = measured[kind]
            if not values:
                records.append(level.record(
                    TRUNCATION, kind, p=p, K=K, warn='non-unisolvent footprint'
                ))
                continue
            records.append(level.record(
                TRUNCATION, kind, p=p, K=K,
                ratio_min=float(np.min(values)),
                ratio_max=float(np.max(values)),
                warn=_join_warnings(
                    full.warnings,
                    f'{failures} footprint(s) skipped' if failures else ''
                )
            ))
    _fit_against_K(records)
    return records


def theta_cells(level):
    """theta times coefficient norm over sampled footprints."""
    cfg = level.cfg
    order, _ = level.deepest_centers(_SAMPLE_CENTERS)
    records = []
    for K in cfg.K_values:
        fp_cfg = level.footprint_cfg(K)
        products = []
        skipped = 0
        for j in order:
            xi_id = int(level.xi.ids[j])
            upsilon = geometry.footprint(xi_id, level.centers, fp_cfg)
            if len(upsilon) > _MAX_FOOTPRINT:
                skipped += 1
                continue
            try:
                theta, coeff_norm = theta_vs_coeff_norm(level.kernel, upsilon)
            except (KernelError, InterpolationError) as ex:
                _logger.warning('theta at K=%s: %s', K, ex)
                skipped += 1
                continue
            products.append(theta * coeff_norm)
        if not products:
            records.append(level.record(
                THETA, 'footprint', K=K, warn='no usable footprints'
            ))
            continue
        records.append(level.record(
            THETA, 'footprint', K=K,
            ratio_min=float(np.min(products)),
            ratio_max=float(np.max(products)),
            warn=f'{skipped} footprint(s) skipped' if skipped else ''
        ))
    return records


def gram_cells(cfg, d):
    """
    Scaled inverse Gram norms of a fixed pattern.

    :param cfg: StudyConfig
    :param d: Spatial dimension
    """
    basis = polynomial_basis(cfg.kernel.m, d)
    records = []
    for radius in cfg.radii:
        system = vandermonde(gram_pattern(d, radius), basis)
        value = system.gram_inverse_norm * radius ** (2 * (cfg.kernel.m - 1))
        records.append(CellRecord(
            study=GRAM, kind='pattern', radius=radius,
            ratio_min=value, ratio_max=value
        ))
    return records


def fill_growth_factors(records):
    """
    Set the slope of each unfitted cell to the growth of ratio_max over
    the previous cell of the same series.

    :param records: CellRecord list in level order
    """
    previous = {}
    for record in records:
        key = record.series()
        if record.skipped:
            previous.pop(key, None)
            continue
        if record.slope is None and key in previous and previous[key] > 0:
            record.slope = record.ratio_max / previous[key]
        previous[key] = record.ratio_max


def _bernstein_skip_reason(level, m, d, p, sigma):
    if sigma > m - max(d / 2 - d / p, 0) + _RANGE_TOL:
        return 'sigma outside theorem range'
    try:
        spec = norms.NormSpec(p, sigma)
    except norms.UnsupportedNorm as ex:
        return str(ex)
    if not level.quadrature_ok:
        return 'quadrature too coarse for q'
    return ''


def _lp(level, kind, draws, p):
    where = 'sup' if math.isinf(p) else 'nodes'
    return norms.lp_norm_values(
        level.sample(kind, where, draws), level.weights(where), p
    )


def _sobolev(level, kind, draws, sigma, p):
    where = 'sup' if math.isinf(p) else 'nodes'
    spec = norms.NormSpec(p, sigma)
    derivatives = {}
    seminorms = []
    for j in range(spec.k + 1):
        derivatives = {
            alpha: level.sample(kind, where, draws, alpha if j else None)
            for alpha in multi_indices(level.d, j)
        }
        seminorms.append(norms.sobolev_seminorm_values(
            derivatives, level.weights(where), j, p
        ))
    integer = norms.combine_orders(seminorms, spec.k, p)
    if not spec.delta:
        return integer
    rule = level.fractional_rule()
    if rule is not level.quadrature:
        basis = level.basis(kind)
        derivatives = {
            alpha: basis.synthesis_matrix(
                rule.nodes, alpha if spec.k else None, singular='nan'
            ) @ draws
            for alpha in multi_indices(level.d, spec.k)
        }
    fractional = norms.slobodeckij_seminorm_values(
        derivatives, rule, spec.k, spec.delta, p
    )
    return (integer ** p + fractional ** p) ** (1 / p)


def _sobolev_of_basis(level, basis, k, p):
    seminorms = []
    for j in range(k + 1):
        derivatives = {
            alpha: basis.synthesis_matrix(
                level.quadrature.nodes, alpha if j else None, singular='nan'
            )
            for alpha in multi_indices(level.d, j)
        }
        seminorms.append(norms.sobolev_seminorm_values(
            derivatives, level.quadrature.weights, j, p
        ))
    return norms.combine_orders(seminorms, k, p)


def _difference(column, other):
    ids = np.union1d(column.center_ids, other.center_ids)
    values = np.zeros(len(ids))
    values[np.searchsorted(ids, column.center_ids)] += column.coefficients
    values[np.searchsorted(ids, other.center_ids)] -= other.coefficients
    return LagrangeColumn(
        xi_id=column.xi_id,
        center_ids=ids,
        coefficients=values,
        polynomial=column.polynomial - other.polynomial
    )


def _fit_against_K(records):
    series = {}
    for record in records:
        if not record.skipped and record.ratio_max > 0:
            series.setdefault(record.kind, []).append(record)
    for group in series.values():
        if len(group) < 2:
            continue
        Ks = [r.K for r in group]
        slope, _ = np.polyfit(Ks, np.log([r.ratio_max for r in group]), 1)
        for record in group:
            record.slope = float(slope)


def _ratio_record(level, study, kind, ratios, basis, **kwargs):
    ratios = np.asarray(ratios, dtype=float)
    finite = ratios[np.isfinite(ratios)]
    if not len(finite):
        return level.record(study, kind, warn='no finite ratios', **kwargs)
    return level.record(
        study, kind,
        ratio_min=float(np.min(finite)),
        ratio_max=float(np.max(finite)),
        warn=_join_warnings(
            basis.warnings,
            f'{len(ratios) - len(finite)} draw(s) not finite'
            if len(finite) < len(ratios) else ''
        ),
        **kwargs
    )


def _skip_all(level, study, kind, p_values, reason):
    return [level.record(study, kind, p=p, warn=str(reason)) for p in p_values]


def _join_warnings(*warnings):
    flat = []
    for w in warnings:
        flat.extend([w] if isinstance(w, str) else w)
    return '; '.join(w for w in flat if w)


def _format_exponent(p):
    return 'inf' if math.isinf(p) else f'{p:g}'
