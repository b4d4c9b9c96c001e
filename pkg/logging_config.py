import logging
import logging.handlers
import os
import time
from functools import wraps
from typing import Optional

from config import LOG_LEVEL, LOG_FILE

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

MODULE_LOGGERS = [
    "rbc", "gaussian_rates", "gaussian_scheme", "region_geometry",
    "dm_bounds", "mc_oracle", "dataset_io",
]


def setup_logging(level: str = LOG_LEVEL, log_file: Optional[str] = LOG_FILE) -> None:
    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    # Repeated CLI invocations in one process must not stack handlers
    for handler in list(root_logger.handlers):
        if getattr(handler, "_rbc_handler", False):
            root_logger.removeHandler(handler)
            handler.close()

    formatter = logging.Formatter(LOG_FORMAT)

    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir and not os.path.exists(log_dir):
            os.makedirs(log_dir)
        file_handler = logging.handlers.RotatingFileHandler(
            log_file, maxBytes=10*1024*1024, backupCount=5  # 10 MB per file, keep 5 backup files
        )
        file_handler.setFormatter(formatter)
        file_handler._rbc_handler = True
        root_logger.addHandler(file_handler)

    # stdout carries datasets, so the console handler writes to stderr
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    console_handler.setLevel(logging.WARNING)
    console_handler._rbc_handler = True
    root_logger.addHandler(console_handler)

    for logger_name in MODULE_LOGGERS:
        logging.getLogger(logger_name).setLevel(level)

    logging.getLogger("time_analysis").setLevel(logging.DEBUG)


def log_execution_time(logger):
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            result = func(*args, **kwargs)
            end_time = time.perf_counter()
            logger.debug(f"{func.__name__} executed in {end_time - start_time:.2f} seconds")
            return result
        return wrapper
    return decorator
