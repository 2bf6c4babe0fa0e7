"""
Configuration and report model classes.

KernelSpec, StudyConfig and CliConfig are the validated forms of a
config file; CellRecord and ExperimentReport carry study results.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .geometry import PointSetMetrics


METRICS = 'metrics'
BASIS = 'basis'
STUDY = 'study'
COMMANDS = (METRICS, BASIS, STUDY)

DECAY = 'decay'
STABILITY = 'stability'
NIKOLSKII = 'nikolskii'
BERNSTEIN = 'bernstein'
TRUNCATION = 'truncation'
TRACE = 'trace'
TRACE_SPLIT = 'trace_split'
GRAM = 'gram'
THETA = 'theta'
STUDIES = (DECAY, STABILITY, BERNSTEIN, TRUNCATION, TRACE, GRAM, THETA)


@dataclass
class KernelSpec:
    """
    Kernel selection.

    :param family: matern or surface_spline
    :param m: Kernel order
    """
    family: str
    m: int


@dataclass
class StudyConfig:
    """
    Parameters of one inequality study.

    :param kind: Study name from STUDIES
    :param h_levels: Strictly decreasing target fill distances, all < 1
    :param quadrature_fraction: Quadrature resolution as a fraction of h
    :param local_K: Footprint multiplier of the local basis
    :param nikolskii_pairs: (r, p) exponent pairs
    :param extension_margin: Extended domain radius as a multiple of
                             the domain diameter
    :param radii: Pattern radii of the gram study
    """
    kind: str
    domain: str
    kernel: KernelSpec
    h_levels: List[float] = field(default_factory=list)
    p_values: List[float] = field(default_factory=lambda: [2.0])
    sigma_values: List[float] = field(default_factory=lambda: [1.0])
    K_values: List[float] = field(default_factory=lambda: [2.0, 4.0, 6.0, 8.0])
    n_random_coeff: int = 100
    seed: int = 0
    quadrature_fraction: float = 0.1
    local_K: float = 6.0
    basis_kinds: List[str] = field(default_factory=lambda: ['full', 'local'])
    nikolskii_pairs: List[Tuple[float, float]] = field(
        default_factory=lambda: [(2.0, math.inf)]
    )
    extension_margin: float = 1.0
    radii: List[float] = field(default_factory=lambda: [1.0, 0.5, 0.25, 0.125])
    log_floor: float = 1.0


@dataclass
class CliConfig:
    """
    A validated command-line configuration.

    :param command: metrics, basis or study
    :param target_h: Generation spacing for metrics and basis commands
    :param probe_resolution: Probe spacing for fill distance estimates
    :param study: StudyConfig for the study command
    """
    command: str
    domain: str
    seed: int = 0
    output_dir: str = '.'
    verbosity: int = 0
    target_h: Optional[float] = None
    probe_resolution: Optional[float] = None
    kernel: Optional[KernelSpec] = None
    local_K: float = 6.0
    extension_margin: float = 1.0
    study: Optional[StudyConfig] = None


@dataclass
class CellRecord:
    """
    One measured cell of a study.

    :param metrics: PointSetMetrics of the level the cell was measured on
    :param radius: Pattern radius, for cells without a point set level
    :param ratio_min: Smallest measured ratio, None if skipped
    :param ratio_max: Largest measured ratio, None if skipped
    :param slope: Fitted slope or growth factor
    :param resid: Fit quality (R^2)
    :param warn: Skip reason or warning text
    """
    study: str
    kind: str
    metrics: Optional[PointSetMetrics] = None
    radius: Optional[float] = None
    p: Optional[float] = None
    sigma: Optional[float] = None
    K: Optional[float] = None
    ratio_min: Optional[float] = None
    ratio_max: Optional[float] = None
    slope: Optional[float] = None
    resid: Optional[float] = None
    warn: str = ''

    @property
    def h(self):
        return self.metrics.fill_distance if self.metrics else self.radius

    @property
    def q(self):
        return self.metrics.separation_radius if self.metrics else None

    @property
    def rho(self):
        return self.metrics.mesh_ratio if self.metrics else None

    @property
    def skipped(self):
        return self.ratio_max is None

    def series(self):
        """Key of the cell across levels: everything but the level."""
        return (self.study, self.kind, self.p, self.sigma, self.K)


@dataclass
class ExperimentReport:
    """
    Results of one study.

    :param study: Study name
    :param records: Cells in deterministic order
    :param provenance: Ordered (key, value) pairs describing the run
    """
    study: str
    records: List[CellRecord] = field(default_factory=list)
    provenance: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def degenerate(self):
        return all(r.skipped for r in self.records)
