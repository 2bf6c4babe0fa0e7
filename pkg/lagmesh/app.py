"""Main entry for the lagmesh command line."""
import json
import logging

import click

from . import env, geometry, serialization
from .experiments import run_study
from .experiments.studies import make_kernel
from .interpolation import local_basis, solve_full_lagrange
from .models import BASIS, METRICS
from .persistence import ReportStore


EXIT_OK = 0
EXIT_DEGENERATE = 1
EXIT_ERROR = 2
_ERROR_CONTEXT = ('key', 'line', 'column')
_logger = logging.getLogger(__name__)


@click.group()
def main():
    """Lagrange bases for Matérn and surface spline kernels."""


@main.command('run')
@click.argument('config', type=click.Path(dir_okay=False))
@click.option('--seed', type=int, default=None,
              help='Override the config seed.')
@click.option('--output', '-o', 'output_dir', default=None,
              type=click.Path(file_okay=False),
              help='Override the config output directory.')
@click.option('--verbose', '-v', count=True,
              help='Log INFO (-v) or DEBUG (-vv) events.')
@click.pass_context
def run_command(ctx, config, seed, output_dir, verbose):
    """Run the metrics, basis or study command of CONFIG."""
    env.init(verbose)
    _logger.info('lagmesh v%s', env.get_version())
    try:
        cfg = serialization.parse_config(config)
        _override(cfg, seed, output_dir)
        env.set_verbosity(max(verbose, cfg.verbosity))
        status = run(cfg)
    except Exception as ex:
        status = _report_error(ex)
    ctx.exit(status)


@main.command('check')
@click.argument('config', type=click.Path(dir_okay=False))
@click.pass_context
def check_command(ctx, config):
    """Validate CONFIG and print it with defaults filled."""
    env.init()
    try:
        cfg = serialization.parse_config(config)
        click.echo(serialization.serialize_config(cfg))
        status = EXIT_OK
    except Exception as ex:
        status = _report_error(ex)
    ctx.exit(status)


def run(cfg, pool=None):
    """
    Execute a validated config.

    :param cfg: CliConfig
    :param pool: Optional WorkPool for studies
    :returns: Exit status, EXIT_DEGENERATE if every study cell was skipped
    """
    domain = geometry.get_domain(cfg.domain)
    store = ReportStore(cfg.output_dir)
    if cfg.command in (METRICS, BASIS):
        xi = geometry.generate_quasi_uniform(domain, cfg.target_h, cfg.seed)
        metrics = geometry.point_set_metrics(
            xi, domain, cfg.probe_resolution
        )
        _logger.info(
            'N=%d h=%.4g q=%.4g rho=%.3g', len(xi), metrics.fill_distance,
            metrics.separation_radius, metrics.mesh_ratio
        )
        if cfg.command == METRICS:
            store.save_point_set(xi)
        else:
            _save_bases(cfg, domain, xi, metrics, store)
        click.echo(f'N = {len(xi)}')
        click.echo(f'h = {metrics.fill_distance:.12g}')
        click.echo(f'q = {metrics.separation_radius:.12g}')
        click.echo(f'rho = {metrics.mesh_ratio:.12g}')
        return EXIT_OK

    report = run_study(cfg.study, pool)
    store.save_report(report)
    skipped = sum(1 for r in report.records if r.skipped)
    click.echo(
        f'{report.study}: {len(report.records)} cells, {skipped} skipped'
    )
    if report.degenerate:
        _logger.warning('every cell of the %s study was skipped', report.study)
        return EXIT_DEGENERATE
    return EXIT_OK


def error_record(ex):
    """
    Single-line JSON description of an error.

    :param ex: The exception
    :returns: JSON text with error, message and any key, line or column
    """
    record = {'error': type(ex).__name__, 'message': str(ex)}
    for name in _ERROR_CONTEXT:
        value = getattr(ex, name, None)
        if value is not None:
            record[name] = value
    return json.dumps(record, sort_keys=True)


def _save_bases(cfg, domain, xi, metrics, store):
    kernel = make_kernel(cfg.kernel, domain.dim)
    extended = geometry.extend_grid(
        xi, domain, metrics.fill_distance, cfg.extension_margin
    )
    centers = geometry.restrict_to_tilde(
        extended, domain, cfg.extension_margin
    )
    full = solve_full_lagrange(kernel, centers, xi.ids)
    local = local_basis(
        kernel, centers, xi.ids,
        geometry.FootprintConfig(cfg.local_K, metrics.fill_distance)
    )
    store.save_basis(xi, full, local)


def _override(cfg, seed, output_dir):
    if seed is not None:
        cfg.seed = seed
        if cfg.study:
            cfg.study.seed = seed
    if output_dir is not None:
        cfg.output_dir = output_dir


def _report_error(ex):
    _logger.critical('unhandled exception', exc_info=True)
    click.echo(error_record(ex), err=True)
    return EXIT_ERROR
