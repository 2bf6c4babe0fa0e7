"""Work pool for independent study cells."""
import concurrent.futures
import logging

from . import env


_logger = logging.getLogger(__name__)


class WorkPool:
    """
    A thread pool mapping a function over jobs with an ordered merge.

    Results come back in job order regardless of completion order.
    """

    def __init__(self, max_workers=None):
        """
        Create a work pool.

        :param max_workers: Thread cap; defaults to LAGMESH_THREADS
        """
        self._max_workers = max_workers or env.get_thread_count()

    @property
    def max_workers(self):
        return self._max_workers

    def map(self, fn, jobs):
        """
        Apply fn to every job.

        :param fn: Callable taking one job
        :param jobs: Iterable of jobs
        :returns: List of results in job order
        """
        jobs = list(jobs)
        if self._max_workers == 1 or len(jobs) < 2:
            return [fn(job) for job in jobs]
        _logger.debug(
            'running %d jobs on %d threads', len(jobs), self._max_workers
        )
        with concurrent.futures.ThreadPoolExecutor(
            max_workers=self._max_workers
        ) as executor:
            return list(executor.map(fn, jobs))
