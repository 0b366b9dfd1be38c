import logging

from .error import Error

# Level 4 (trace) has no counterpart in the standard library.
TRACE = 5
logging.addLevelName(TRACE, "TRACE")

_LEVELS = {
    0: logging.ERROR,
    1: logging.WARNING,
    2: logging.INFO,
    3: logging.DEBUG,
    4: TRACE,
}

_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

_handler = None


def log_to_stderr(level: int = 1):
    """
    Activate logging of photon-shaper directly to standard error. In particular these logs contain
    the progress of the genetic algorithm, convergence diagnostics of the reconstructions and the
    paths of written artifacts. Call this method only once in your application

    :param level: Specifies the log level with which the standard error logger is initialized.

        * 0 - Error
        * 1 - Warning,
        * 2 - Info
        * 3 - Debug
        * 4 - Trace

        Non-convergence of FROG retrieval or of the Fock population fit is reported as warning.
        Generation summaries of the genetic algorithm are info, individual fitness values trace,
        as are the errors of every FROG retrieval iteration.
    """
    global _handler
    if _handler is not None:
        raise Error("attempted to set a logger after the logging system was already initialized")
    if level not in _LEVELS:
        raise Error(f"log level must be one of 0, 1, 2, 3 or 4, got {level}")

    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(_FORMAT))
    logger = logging.getLogger("photon_shaper")
    logger.addHandler(handler)
    logger.setLevel(_LEVELS[level])
    _handler = handler
