"""
Experiment harness.

Each run_*_study function sweeps a StudyConfig over its fill distance
levels, one work pool job per level, and merges the cells in level
order. run_study dispatches on the study kind.
"""
import logging

from . import studies
from .. import env, geometry
from ..models import (
    BERNSTEIN, DECAY, GRAM, STABILITY, THETA, TRACE, TRUNCATION,
    ExperimentReport
)
from ..operations import WorkPool


_logger = logging.getLogger(__name__)


def run_study(cfg, pool=None):
    """
    Run one study.

    :param cfg: StudyConfig
    :param pool: WorkPool for the levels; defaults to LAGMESH_THREADS threads
    :returns: ExperimentReport
    :raises InvalidStudy: If cfg names an unknown study
    """
    try:
        runner = _runners[cfg.kind]
    except KeyError:
        raise InvalidStudy(cfg.kind) from None
    return runner(cfg, pool)


def run_decay_study(cfg, pool=None):
    """Exponential decay of full Lagrange functions and coefficients."""
    return _run_levels(cfg, studies.decay_cells, pool)


def run_stability_study(cfg, pool=None):
    """Stability and Nikolskii ratios of full and local bases."""
    return _run_levels(cfg, studies.stability_cells, pool)


def run_bernstein_study(cfg, pool=None):
    """Bernstein (inverse) inequality ratios."""
    return _run_levels(cfg, studies.bernstein_cells, pool)


def run_truncation_study(cfg, pool=None):
    """Truncated and local against full Lagrange functions over K."""
    return _run_levels(cfg, studies.truncation_cells, pool)


def run_trace_study(cfg, pool=None):
    """Trace ratios and the h-balanced trace split."""
    return _run_levels(cfg, studies.trace_cells, pool)


def run_theta_study(cfg, pool=None):
    """theta times the local coefficient norm over footprints."""
    return _run_levels(cfg, studies.theta_cells, pool)


def run_gram_study(cfg, pool=None):
    """Scaled inverse Gram norms of a fixed pattern over radii."""
    domain = geometry.get_domain(cfg.domain)
    _logger.info('running gram study in dimension %d', domain.dim)
    records = studies.gram_cells(cfg, domain.dim)
    studies.fill_growth_factors(records)
    return ExperimentReport(cfg.kind, records, _provenance(cfg, []))


def _run_levels(cfg, cells, pool):
    domain = geometry.get_domain(cfg.domain)
    kernel = studies.make_kernel(cfg.kernel, domain.dim)
    _logger.info(
        'running %s study on %s with %s m=%d',
        cfg.kind, domain.name, kernel.family, kernel.m
    )
    pool = pool or WorkPool()

    def measure(index):
        level = studies.prepare_level(cfg, domain, kernel, index)
        return level, cells(level)

    results = pool.map(measure, range(len(cfg.h_levels)))
    records = [record for _, level_records in results
               for record in level_records]
    for record in records:
        if record.skipped:
            _logger.warning(
                'skipped %s %s cell: %s', record.study, record.kind, record.warn
            )
    studies.fill_growth_factors(records)
    return ExperimentReport(
        cfg.kind, records, _provenance(cfg, [level for level, _ in results])
    )


def _provenance(cfg, levels):
    provenance = [
        ('study', cfg.kind),
        ('domain', cfg.domain),
        ('kernel', f'{cfg.kernel.family} m={cfg.kernel.m}'),
        ('seed', str(cfg.seed)),
        ('n_random_coeff', str(cfg.n_random_coeff)),
        ('quadrature_fraction', f'{cfg.quadrature_fraction:g}'),
        ('extension_margin', f'{cfg.extension_margin:g}'),
        ('version', env.get_version()),
    ]
    for level in levels:
        provenance.append((
            f'level.{level.index}',
            f'target_h={cfg.h_levels[level.index]:g} N={len(level.xi)} '
            f'centers={len(level.centers)} '
            f'quadrature={level.quadrature.resolution:.4g} '
            f'probe={level.metrics.probe_resolution:.4g}'
        ))
    return provenance


class StudyError(Exception):
    """General study error."""
    pass


class InvalidStudy(StudyError):
    """Study name has no implementation."""

    def __init__(self, study, *args, **kwargs):
        """
        Create an invalid study error.

        :param study: The unknown study name
        """
        super().__init__(f'unknown study {study}', *args, **kwargs)
        self.study = study


_runners = {
    DECAY: run_decay_study,
    STABILITY: run_stability_study,
    BERNSTEIN: run_bernstein_study,
    TRUNCATION: run_truncation_study,
    TRACE: run_trace_study,
    GRAM: run_gram_study,
    THETA: run_theta_study,
}
