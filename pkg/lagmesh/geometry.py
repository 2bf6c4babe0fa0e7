"""
Point sets, domains and the geometric operations on them.

Centers are generated quasi-uniformly inside a domain, measured
(fill distance, separation radius, mesh ratio), extended by a lattice
beyond the domain and cut down to footprints around a single center.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.spatial
import scipy.spatial.distance


_logger = logging.getLogger(__name__)
_DIST_TOL = 1e-12
_FILL_THRESHOLD = 0.75
_JITTER = 0.125
_CURVE_VERTICES = 2048
_domains = {}


def init():
    """Initialize built-in domains."""
    global _domains
    _domains.update(
        interval=Domain.interval,
        square=Domain.square,
        disk=Domain.disk,
        cardioid=Domain.cardioid,
    )


def get_domain(name):
    """
    Get a built-in domain by its name.

    :param name: The string name of the domain
    :returns: A new Domain instance
    :raises UnknownDomain: If no such domain is registered
    """
    if not _domains:
        init()
    try:
        return _domains[name]()
    except KeyError:
        raise UnknownDomain(name) from None


def domain_names():
    """
    Get the names of the built-in domains.

    :returns: Sorted list of domain names
    """
    if not _domains:
        init()
    return sorted(_domains)


def domain_dimension(name):
    """
    Get the spatial dimension of a built-in domain without building it.

    :param name: The string name of the domain
    :returns: 1 or 2
    """
    if name not in domain_names():
        raise UnknownDomain(name)
    return 1 if name == 'interval' else 2


@dataclass(frozen=True, eq=False)
class PointSet:
    """
    An ordered set of pairwise-distinct points, each with a stable id.

    :param points: (n, d) array of coordinates
    :param ids: (n,) array of unique integer ids
    """
    points: np.ndarray
    ids: np.ndarray
    _index: dict = field(init=False, repr=False)

    @classmethod
    def create(cls, points, first_id=0):
        """
        Create a point set with contiguous ids.

        :param points: Sequence of d-vectors, or of scalars for d = 1
        :param first_id: The id of the first point
        """
        coords = _as_coordinates(points)
        return cls(coords, np.arange(first_id, first_id + len(coords)))

    def __post_init__(self):
        points = _as_coordinates(self.points)
        ids = np.array(self.ids, dtype=int).reshape(-1)
        if len(ids) != len(points):
            raise InvalidPointSet('ids and points differ in length')
        if not np.all(np.isfinite(points)):
            raise InvalidPointSet('points must be finite')
        if len(np.unique(ids)) != len(ids):
            raise InvalidPointSet('point ids must be unique')
        if len(points) > 1:
            dists, _ = scipy.spatial.cKDTree(points).query(points, k=2)
            if np.min(dists[:, 1]) <= 0:
                raise InvalidPointSet('points must be pairwise distinct')
        points.setflags(write=False)
        ids.setflags(write=False)
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'ids', ids)
        object.__setattr__(
            self, '_index', {int(i): n for n, i in enumerate(ids)}
        )

    def __len__(self):
        return len(self.ids)

    @property
    def dim(self):
        return self.points.shape[1]

    def index_of(self, ids):
        """
        Get row positions of point ids.

        :param ids: A single id or a sequence of ids
        :returns: The position or an array of positions
        :raises InvalidPointSet: If an id is not in the set
        """
        try:
            if np.ndim(ids) == 0:
                return self._index[int(ids)]
            return np.array([self._index[int(i)] for i in ids], dtype=int)
        except KeyError as ex:
            raise InvalidPointSet(f'no point with id {ex.args[0]}') from None

    def point(self, point_id):
        """Get the coordinates of one point by id."""
        return self.points[self.index_of(point_id)]

    def subset(self, selection):
        """
        Create a point set from some of these points, keeping their ids.

        :param selection: Boolean mask or integer positions
        """
        return PointSet(self.points[selection], self.ids[selection])

    def union(self, other):
        """Create a point set holding these points followed by other."""
        return PointSet(
            np.vstack([self.points, other.points]),
            np.concatenate([self.ids, other.ids])
        )


@dataclass(frozen=True)
class PointSetMetrics:
    """
    Geometric quality measures of a point set in a domain.

    :param fill_distance: h, largest distance from the domain to the set
    :param separation_radius: q, half the smallest pairwise distance
    :param mesh_ratio: rho = h / q
    :param probe_resolution: Probe grid spacing used to estimate h
    """
    fill_distance: float
    separation_radius: float
    mesh_ratio: float
    probe_resolution: float


@dataclass(frozen=True)
class FootprintConfig:
    """
    Footprint radius parameters.

    The radius is K * h * max(|ln h|, log_floor).
    """
    K: float
    h: float
    log_floor: float = 1.0

    def __post_init__(self):
        if self.K <= 0:
            raise GeometryError(
                f'footprint multiplier must be positive, got {self.K}'
            )
        if not 0 < self.h < 1:
            raise GeometryError(
                f'footprint requires h in (0, 1), got {self.h}'
            )

    @property
    def radius(self):
        return self.K * self.h * max(abs(math.log(self.h)), self.log_floor)


@dataclass(frozen=True, eq=False)
class Boundary:
    """
    Boundary of a domain.

    For d = 2 this is a closed polyline through vertices, sampled by arc
    length. For d = 1 the vertices are the two interval endpoints.
    """
    vertices: np.ndarray

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def perimeter(self):
        if self.dim == 1:
            return 2.0
        return float(np.sum(self._segment_lengths()))

    def sample(self, resolution):
        """
        Sample the boundary with an arc-length midpoint rule.

        :param resolution: Largest allowed spacing between nodes
        :returns: Tuple of (nodes, weights); d = 1 uses unit weights
                  at both endpoints
        """
        if self.dim == 1:
            return self.vertices.copy(), np.ones(2)
        lengths = self._segment_lengths()
        arc = np.concatenate([[0.0], np.cumsum(lengths)])
        count = max(math.ceil(arc[-1] / resolution - 1e-9), 1)
        spacing = arc[-1] / count
        targets = (np.arange(count) + 0.5) * spacing
        closed = np.vstack([self.vertices, self.vertices[:1]])
        nodes = np.column_stack([
            np.interp(targets, arc, closed[:, axis])
            for axis in range(self.dim)
        ])
        return nodes, np.full(count, spacing)

    def distance(self, points):
        """
        Distance from each point to the boundary.

        :param points: (n, d) array
        :returns: (n,) array
        """
        points = _as_coordinates(points)
        if self.dim == 1:
            return np.min(np.abs(points - self.vertices.T), axis=1)
        start = self.vertices
        end = np.roll(self.vertices, -1, axis=0)
        edge = end - start
        edge_sq = np.maximum(np.sum(edge ** 2, axis=1), np.finfo(float).tiny)
        result = np.empty(len(points))
        chunk = max(1, 2_000_000 // len(start))
        for lo in range(0, len(points), chunk):
            block = points[lo:lo + chunk, None, :]
            t = np.clip(np.sum((block - start) * edge, axis=2) / edge_sq, 0, 1)
            nearest = start + t[..., None] * edge
            result[lo:lo + chunk] = np.min(
                np.linalg.norm(block - nearest, axis=2), axis=1
            )
        return result

    def _segment_lengths(self):
        return np.linalg.norm(
            np.roll(self.vertices, -1, axis=0) - self.vertices, axis=1
        )


@dataclass(frozen=True, eq=False)
class Domain:
    """
    A bounded region.

    :param name: One of interval, square, disk, cardioid or custom
    :param dim: Spatial dimension (1 or 2)
    :param indicator: Vectorized predicate on (n, d) arrays, True inside
    :param bbox: (2, d) array of lower and upper corners
    :param boundary: The domain boundary
    :param diameter: Largest distance between two points of the domain
    """
    name: str
    dim: int
    indicator: Callable[[np.ndarray], np.ndarray]
    bbox: np.ndarray
    boundary: Optional[Boundary]
    diameter: float

    @classmethod
    def interval(cls, lo=0.0, hi=1.0):
        """Create the closed interval [lo, hi]."""
        return cls(
            name='interval',
            dim=1,
            indicator=lambda x: (x[:, 0] >= lo) & (x[:, 0] <= hi),
            bbox=np.array([[lo], [hi]], dtype=float),
            boundary=Boundary(np.array([[lo], [hi]], dtype=float)),
            diameter=float(hi - lo)
        )

    @classmethod
    def square(cls, side=1.0):
        """Create the closed square [0, side]^2."""
        corners = np.array(
            [[0, 0], [side, 0], [side, side], [0, side]], dtype=float
        )
        return cls(
            name='square',
            dim=2,
            indicator=lambda x: np.all((x >= 0) & (x <= side), axis=1),
            bbox=np.array([[0, 0], [side, side]], dtype=float),
            boundary=Boundary(corners),
            diameter=float(side * math.sqrt(2))
        )

    @classmethod
    def disk(cls, radius=1.0):
        """Create the closed disk of the given radius at the origin."""
        theta = np.linspace(0, 2 * np.pi, _CURVE_VERTICES, endpoint=False)
        return cls(
            name='disk',
            dim=2,
            indicator=lambda x: np.linalg.norm(x, axis=1) <= radius,
            bbox=np.array([[-radius, -radius], [radius, radius]]),
            boundary=Boundary(
                radius * np.column_stack([np.cos(theta), np.sin(theta)])
            ),
            diameter=2.0 * radius
        )

    @classmethod
    def cardioid(cls):
        """Create the cardioid r = 1 + cos(theta) scaled to unit diameter."""
        theta = np.linspace(-np.pi, np.pi, _CURVE_VERTICES, endpoint=False)
        radii = 1 + np.cos(theta)
        curve = np.column_stack([radii * np.cos(theta), radii * np.sin(theta)])
        scale = 1.0 / _polyline_diameter(curve)

        def indicator(x):
            r = np.linalg.norm(x, axis=1) / scale
            return r <= 1 + np.cos(np.arctan2(x[:, 1], x[:, 0]))

        vertices = scale * curve
        return cls(
            name='cardioid',
            dim=2,
            indicator=indicator,
            bbox=np.array([vertices.min(axis=0), vertices.max(axis=0)]),
            boundary=Boundary(vertices),
            diameter=1.0
        )

    @classmethod
    def custom(cls, indicator, vertices):
        """
        Create a planar domain from an indicator and a boundary polyline.

        :param indicator: Vectorized predicate on (n, 2) arrays
        :param vertices: (M, 2) vertices of the closed boundary polyline
        """
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2 or len(vertices) < 3:
            raise GeometryError('custom domains need a planar polyline')
        return cls(
            name='custom',
            dim=2,
            indicator=indicator,
            bbox=np.array([vertices.min(axis=0), vertices.max(axis=0)]),
            boundary=Boundary(vertices),
            diameter=_polyline_diameter(vertices)
        )

    def contains(self, points):
        """Indicator evaluated on an (n, d) array."""
        return np.asarray(self.indicator(_as_coordinates(points)), dtype=bool)

    def distance(self, points):
        """
        Distance from each point to the domain; zero inside.

        :param points: (n, d) array
        """
        points = _as_coordinates(points)
        return np.where(
            self.contains(points), 0.0, self._boundary().distance(points)
        )

    def boundary_distance(self, points):
        """Distance from each point to the domain boundary."""
        return self._boundary().distance(points)

    def probe_grid(self, resolution):
        """
        Grid of spacing at most resolution over the bbox, restricted to
        points inside the domain; bbox corners are included.

        :param resolution: Grid spacing
        :returns: (n, d) array
        """
        axes = [
            np.linspace(lo, hi, math.ceil((hi - lo) / resolution - 1e-9) + 1)
            for lo, hi in self.bbox.T
        ]
        grid = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)
        grid = grid.reshape(-1, self.dim)
        return grid[self.contains(grid)]

    def _boundary(self):
        if self.boundary is None:
            raise GeometryError(f'domain {self.name} has no boundary')
        return self.boundary


def generate_quasi_uniform(domain, target_h, seed):
    """
    Generate a quasi-uniform point set by jittering a regular grid.

    A grid of spacing target_h is jittered by up to target_h / 8 per
    coordinate and cut by the domain indicator. Gaps left near the
    boundary are filled with probe points farther than 3/4 target_h from
    every center, farthest first.

    :param domain: The domain to fill
    :param target_h: Grid spacing, in (0, 1) and below diameter / 4
    :param seed: Seed for the jitter generator
    :returns: A PointSet with ids 0..n-1
    :raises EmptyDomain: If the domain indicator rejects every probe
    """
    if not 0 < target_h < 1 or target_h >= domain.diameter / 4:
        raise GeometryError(
            f'target_h must be in (0, 1) and below diameter/4, got {target_h}'
        )
    rng = np.random.default_rng(seed)
    axes = [
        lo
        + (np.arange(math.ceil((hi - lo) / target_h - 1e-9)) + 0.5) * target_h
        for lo, hi in domain.bbox.T
    ]
    grid = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)
    grid = grid.reshape(-1, domain.dim)
    grid += rng.uniform(-_JITTER * target_h, _JITTER * target_h, grid.shape)
    centers = grid[domain.contains(grid)]

    probes = domain.probe_grid(target_h / 10)
    if not len(probes) and not len(centers):
        raise EmptyDomain(domain.name)
    if not len(centers):
        centers = probes[:1]
    gaps, _ = scipy.spatial.cKDTree(centers).query(probes)
    added = []
    while len(gaps):
        farthest = int(np.argmax(gaps))
        if gaps[farthest] <= _FILL_THRESHOLD * target_h:
            break
        added.append(probes[farthest])
        gaps = np.minimum(
            gaps, np.linalg.norm(probes - probes[farthest], axis=1)
        )
    if added:
        _logger.debug('filled %d boundary gaps in %s', len(added), domain.name)
        centers = np.vstack([centers, added])
    return PointSet.create(centers)


def point_set_metrics(X, domain, probe_resolution=None):
    """
    Measure fill distance, separation radius and mesh ratio.

    :param X: The point set
    :param domain: The domain the fill distance is taken over
    :param probe_resolution: Probe grid spacing; if omitted a coarse pass
                             at diameter / 50 estimates h and the probe
                             spacing becomes h / 10
    :returns: PointSetMetrics
    :raises DegenerateSeparation: If X has fewer than two points
    """
    points = _coords(X)
    if len(points) < 2:
        raise DegenerateSeparation(len(points))
    tree = scipy.spatial.cKDTree(points)
    dists, _ = tree.query(points, k=2)
    q = float(np.min(dists[:, 1])) / 2
    if probe_resolution is None:
        coarse = _fill_distance(tree, domain, domain.diameter / 50)
        probe_resolution = coarse / 10
    h = _fill_distance(tree, domain, probe_resolution)
    if probe_resolution > h / 5:
        _logger.warning(
            'probe resolution %.3g is coarse for fill distance %.3g',
            probe_resolution, h
        )
    return PointSetMetrics(
        fill_distance=h,
        separation_radius=q,
        mesh_ratio=h / q,
        probe_resolution=float(probe_resolution)
    )


def separation_radius(X):
    """Half the smallest pairwise distance, or 0 for fewer than 2 points."""
    points = _coords(X)
    if len(points) < 2:
        return 0.0
    dists, _ = scipy.spatial.cKDTree(points).query(points, k=2)
    return float(np.min(dists[:, 1])) / 2


def extend_grid(Xi, domain, h, margin=1.0):
    """
    Extend a center set by lattice points outside the domain.

    The lattice spacing g is max(h, 2q) so the extension keeps the
    separation radius q of Xi; lattice points are kept when their
    distance to the domain is at least g and they lie in the bbox of the
    extended domain.

    :param Xi: Centers inside the domain
    :param domain: The domain
    :param h: Fill distance of Xi (or an upper bound), below 1
    :param margin: Extended domain radius as a multiple of the diameter
    :returns: PointSet of Xi followed by lattice points with new ids
    :raises ExtensionError: If h >= 1
    """
    if h >= 1:
        raise ExtensionError('extension requires h < 1')
    spacing = max(h, 2 * separation_radius(Xi))
    reach = margin * domain.diameter
    lo, hi = domain.bbox[0] - reach, domain.bbox[1] + reach
    axes = [
        spacing * np.arange(math.ceil(a / spacing), math.floor(b / spacing) + 1)
        for a, b in zip(lo, hi)
    ]
    lattice = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)
    lattice = lattice.reshape(-1, domain.dim)
    keep = domain.distance(lattice) >= spacing * (1 - _DIST_TOL)
    lattice = lattice[keep]
    first_id = int(np.max(Xi.ids)) + 1 if len(Xi) else 0
    _logger.debug(
        'extended %d centers by %d lattice points at spacing %.3g',
        len(Xi), len(lattice), spacing
    )
    return Xi.union(PointSet.create(lattice, first_id=first_id))


def restrict_to_tilde(X_ext, domain, margin=1.0):
    """
    Keep the points within margin * diameter of the domain.

    :param X_ext: Extended point set
    :param domain: The domain
    :param margin: Extended domain radius as a multiple of the diameter
    """
    reach = margin * domain.diameter * (1 + _DIST_TOL)
    return X_ext.subset(domain.distance(X_ext.points) <= reach)


def footprint(xi_id, X_tilde, cfg):
    """
    Get the points of X_tilde within the footprint radius of one center.

    :param xi_id: Id of the footprint center
    :param X_tilde: The point set to select from
    :param cfg: FootprintConfig
    :returns: PointSet containing xi_id, ids preserved
    """
    center = X_tilde.point(xi_id)
    dists = np.linalg.norm(X_tilde.points - center, axis=1)
    return X_tilde.subset(dists <= cfg.radius * (1 + _DIST_TOL))


def write_point_set(X, fp, with_ids=False):
    """
    Write a point set as text: a "dim N" header then one point per line.

    With ids the header is "dim N ids" and every line starts with the
    point id.

    :param X: The point set
    :param fp: A writable text stream
    :param with_ids: Whether to write point ids
    """
    points = _coords(X)
    fp.write(f'{points.shape[1]} {len(points)}{" ids" if with_ids else ""}\n')
    for n, row in enumerate(points):
        fields = [format(v, '.17g') for v in row]
        if with_ids:
            fields.insert(0, str(int(X.ids[n])))
        fp.write(' '.join(fields) + '\n')


def read_point_set(fp):
    """
    Read a point set written by write_point_set.

    :param fp: A readable text stream
    :returns: PointSet with the written ids, or ids 0..N-1
    """
    header = fp.readline().split()
    if len(header) not in (2, 3) or header[2:] not in ([], ['ids']):
        raise InvalidPointSet('point set header must be "dim N [ids]"')
    dim, count = int(header[0]), int(header[1])
    width = dim + len(header) - 2
    rows = [line.split() for line in fp if line.strip()]
    if len(rows) != count or any(len(r) != width for r in rows):
        raise InvalidPointSet(f'expected {count} points of dimension {dim}')
    values = np.array(rows, dtype=float).reshape(count, width)
    if width == dim:
        return PointSet.create(values)
    return PointSet(values[:, 1:], values[:, 0].astype(int))


def _fill_distance(tree, domain, resolution):
    probes = domain.probe_grid(resolution)
    if not len(probes):
        raise EmptyDomain(domain.name)
    dists, _ = tree.query(probes)
    return float(np.max(dists))


def _polyline_diameter(vertices):
    hull = scipy.spatial.ConvexHull(vertices)
    return float(np.max(
        scipy.spatial.distance.pdist(vertices[hull.vertices])
    ))


def _as_coordinates(points):
    coords = np.array(points, dtype=float)
    if coords.ndim == 0:
        coords = coords.reshape(1, 1)
    elif coords.ndim == 1:
        coords = coords[:, None]
    return coords


def _coords(X):
    return X.points if isinstance(X, PointSet) else _as_coordinates(X)


class GeometryError(Exception):
    """General geometry error."""
    pass


class InvalidPointSet(GeometryError):
    """Point set violates its invariants or lacks a requested id."""
    pass


class DegenerateSeparation(GeometryError):
    """Separation radius is undefined for fewer than two points."""

    def __init__(self, count, *args, **kwargs):
        """
        Create a degenerate separation error.

        :param count: Number of points in the offending set
        """
        super().__init__(
            f'degenerate separation: {count} point(s)', *args, **kwargs
        )
        self.count = count


class EmptyDomain(GeometryError):
    """Domain indicator rejects every probe point."""

    def __init__(self, domain_name, *args, **kwargs):
        """
        Create an empty domain error.

        :param domain_name: Name of the empty domain
        """
        super().__init__(f'empty domain: {domain_name}', *args, **kwargs)
        self.domain_name = domain_name


class ExtensionError(GeometryError):
    """Lattice extension parameters are out of range."""
    pass


class UnknownDomain(GeometryError):
    """No built-in domain with the requested name."""

    def __init__(self, domain_name, *args, **kwargs):
        """
        Create an unknown domain error.

        :param domain_name: The requested name
        """
        super().__init__(f'unknown domain: {domain_name}', *args, **kwargs)
        self.domain_name = domain_name
