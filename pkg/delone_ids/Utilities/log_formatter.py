import sys
import logging
import pathlib
from datetime import datetime

from delone_ids.Utilities.utils import TimeFormat

#These are the sequences need to get colored ouput
RESET_SEQ = "\033[0m"

COLORS = {
    'WARNING': "\033[38;5;130m",
    'INFO': "",
    'VERBOSE': "\033[38;5;6m",
    'DEBUG': "\033[38;5;2m",
    'CRITICAL': "\033[31m",
    'ERROR': "\033[31m",
}

# Per-window and per-site progress, between DEBUG and INFO.
VERBOSE = 15


class ColoredFormatter(logging.Formatter):
    def __init__(self, fmt=None, datefmt=None):
        logging.Formatter.__init__(self, fmt, datefmt)

    def format(self, record):
        skip_line = False
        if isinstance(record.msg, str) and record.msg and record.msg[0] == '\n':
            skip_line = True
            record.msg = record.msg[1:]
        result = logging.Formatter.format(self, record)
        result = COLORS.get(record.levelname, "") + result + RESET_SEQ
        if skip_line:
            result = '\n' + result
        return result


def setup_logger(name, level=logging.INFO, log_dir='logs'):
    """
    Route the root logger to a timestamped file in `log_dir` and to coloured stdout.

    Calling it again (e.g. several CLI invocations in one process) replaces the
    handlers installed by the previous call.

    Returns:
        Path of the log file.
    """
    logging.addLevelName(VERBOSE, "VERBOSE")

    log_dir = pathlib.Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    log_file = log_dir / f"{name}-{datetime.now().strftime(TimeFormat.file)}.log"

    logFormatter = logging.Formatter("[%(asctime)s] [%(levelname)s]: %(message)s", TimeFormat.log)
    colorFormatter = ColoredFormatter("[%(asctime)s] [%(levelname)s]: %(message)s", TimeFormat.log)
    rootLogger = logging.getLogger()

    for handler in list(rootLogger.handlers):
        if getattr(handler, "_delone_ids", False):
            rootLogger.removeHandler(handler)
            handler.close()

    fileHandler = logging.FileHandler(log_file)
    fileHandler.setFormatter(logFormatter)
    fileHandler._delone_ids = True
    rootLogger.addHandler(fileHandler)

    consoleHandler = logging.StreamHandler(sys.stdout)
    consoleHandler.setFormatter(colorFormatter)
    consoleHandler._delone_ids = True
    rootLogger.addHandler(consoleHandler)

    rootLogger.setLevel(level)
    return log_file


if __name__ == "__main__":
    setup_logger("test", logging.DEBUG)
    logging.debug("test")
    logging.log(VERBOSE, "test")
    logging.info("test")
    logging.warning("test")
    logging.error("test")
    logging.critical("test")
