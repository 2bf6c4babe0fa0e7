"""Artifact store for command results."""
import io
import logging
import os
import tempfile

from . import geometry, interpolation
from .experiments import reports


REPORT_TEXT_NAME = 'report.txt'
PLOT_NAME = 'plot.gp'
POINTS_NAME = 'points.txt'
CENTERS_NAME = 'centers.txt'
BASIS_NAME = 'basis.txt'
LOCAL_BASIS_NAME = 'local_basis.txt'
_logger = logging.getLogger(__name__)


class ReportStore:
    """
    Directory store for command artifacts.

    Artifacts of one save are staged as temporary files and renamed
    into place only after every one of them was written.
    """

    def __init__(self, output_dir):
        """
        Create store.

        :param output_dir: Directory receiving artifacts; created on save
        """
        self._output_dir = output_dir

    @property
    def output_dir(self):
        return self._output_dir

    def save_report(self, report):
        """
        Save the CSV table, text summary and gnuplot script of a study.

        :param report: ExperimentReport
        :returns: List of written paths
        """
        return self.write({
            reports.CSV_NAME: reports.format_csv(report),
            REPORT_TEXT_NAME: reports.format_text(report),
            PLOT_NAME: reports.format_plot_script(report),
        })

    def save_point_set(self, X):
        """
        Save a point set.

        :param X: PointSet
        :returns: List of written paths
        """
        return self.write({POINTS_NAME: _point_set_text(X)})

    def save_basis(self, xi, full, local=None):
        """
        Save interior centers, all centers and Lagrange bases.

        :param xi: Interior PointSet
        :param full: Full LagrangeBasis over the extended centers
        :param local: Optional local LagrangeBasis over the same centers
        :returns: List of written paths
        """
        artifacts = {
            POINTS_NAME: _point_set_text(xi),
            CENTERS_NAME: _point_set_text(full.centers, with_ids=True),
            BASIS_NAME: _basis_text(full),
        }
        if local is not None:
            artifacts[LOCAL_BASIS_NAME] = _basis_text(local)
        return self.write(artifacts)

    def write(self, artifacts):
        """
        Write text artifacts all together.

        :param artifacts: Mapping of file name to text
        :returns: List of written paths
        :raises PersistenceError: If any artifact cannot be written;
                                  staged files are removed
        """
        staged = []
        try:
            os.makedirs(self._output_dir, exist_ok=True)
            for name, text in artifacts.items():
                fd, temp_path = tempfile.mkstemp(
                    dir=self._output_dir, prefix=f'.{name}.', suffix='.tmp'
                )
                staged.append((temp_path, os.path.join(self._output_dir, name)))
                with os.fdopen(fd, 'w') as f:
                    f.write(text)
            for temp_path, path in staged:
                os.replace(temp_path, path)
        except OSError as ex:
            for temp_path, _ in staged:
                if os.path.exists(temp_path):
                    os.remove(temp_path)
            raise PersistenceError(self._output_dir, ex.strerror) from ex
        paths = [path for _, path in staged]
        _logger.info('wrote %s', ', '.join(paths))
        return paths


def _basis_text(basis):
    out = io.StringIO()
    interpolation.write_basis(basis, out)
    return out.getvalue()


def _point_set_text(X, with_ids=False):
    out = io.StringIO()
    geometry.write_point_set(X, out, with_ids)
    return out.getvalue()


class PersistenceError(Exception):
    """Artifacts could not be written."""

    def __init__(self, output_dir, reason, *args, **kwargs):
        """
        Create a persistence error.

        :param output_dir: Directory being written
        :param reason: OS error description
        """
        super().__init__(f'cannot write to {output_dir}: {reason}',
                         *args, **kwargs)
        self.output_dir = output_dir
