"""lagmesh initialization helper methods."""
import logging
import logging.handlers
import os

import setuptools_scm

from . import geometry, __version__


_logger = logging.getLogger(__name__)
_VERBOSITY_LEVELS = {1: logging.INFO, 2: logging.DEBUG}


def init(verbosity=0):
    """
    Initialize global application state.

    :param verbosity: Count of -v flags; raises the log level
                      when LAGMESH_LOG_LEVEL is not set
    """
    _init_logging(verbosity)
    geometry.init()


def get_var(name, required=False, default=None):
    """
    Get environment variable value.

    :param name: Name of the env variable (sans LAGMESH_ prefix)
    :required: Raise KeyError if env variable not found
    :default: Default value if env variable not found
    """
    name = f'LAGMESH_{name}'
    val = os.environ[name] if required else os.getenv(name, default)
    return val.format(**os.environ) if val else val


def get_thread_count():
    """
    Get the work-pool size cap.

    :returns: The integer value of LAGMESH_THREADS or 1 if unset
    :raises ValueError: If the variable is not a positive integer
    """
    threads = int(get_var('THREADS', default='1'))
    if threads < 1:
        raise ValueError(f'LAGMESH_THREADS must be at least 1, got {threads}')
    return threads


def get_version():
    """
    Get the current application version.
    """
    try:
        return setuptools_scm.get_version()
    except LookupError:
        return __version__


def set_verbosity(verbosity):
    """
    Raise the root log level to match a verbosity count.

    Has no effect if LAGMESH_LOG_LEVEL is set explicitly.

    :param verbosity: Count of verbosity flags
    """
    level = _verbosity_level(verbosity)
    if level is not None and not get_var('LOG_LEVEL'):
        logging.getLogger().setLevel(level)


def _verbosity_level(verbosity):
    if verbosity <= 0:
        return None
    return _VERBOSITY_LEVELS.get(verbosity, logging.DEBUG)


def _init_logging(verbosity):
    log_level = getattr(logging, get_var('LOG_LEVEL', default=''), None)
    if log_level is None:
        log_level = _verbosity_level(verbosity)
    log_handlers = [logging.StreamHandler()]
    log_folder = get_var('LOG_FOLDER')
    if log_folder:
        os.makedirs(os.path.abspath(log_folder), exist_ok=True)
        log_file = os.path.join(log_folder, 'app.log')
        log_handlers.append(
            logging.handlers.RotatingFileHandler(
                log_file, maxBytes=5*1024*1024, backupCount=1
            )
        )
    logging.basicConfig(
        level=log_level,
        handlers=log_handlers,
        format='%(levelname)s:%(name)s:%(asctime)s %(message)s'
    )
