import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, Optional
import traceback

import orjson

from config.settings import LOGS_DIR

_JSON_OPTIONS = orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_NON_STR_KEYS


def _context(payload: Dict[str, Any], indent: bool = False) -> str:
    if not payload:
        return ""
    options = _JSON_OPTIONS | (orjson.OPT_INDENT_2 if indent else 0)
    return orjson.dumps(payload, default=str, option=options).decode()


class DetailedLogger:
    """Run-level logging with structured JSON context"""

    def __init__(self, service_name: str, log_dir: Optional[Path] = None):
        self.service_name = service_name
        self.log_dir = Path(log_dir) if log_dir else LOGS_DIR
        self.log_dir.mkdir(parents=True, exist_ok=True)

        self.setup_file_loggers()

    def setup_file_loggers(self):
        """Setup the detailed log, the error log and console output"""
        detailed_handler = RotatingFileHandler(
            self.log_dir / f"{self.service_name}_detailed.log",
            maxBytes=10_485_760,  # 10MB
            backupCount=5
        )
        detailed_handler.setLevel(logging.DEBUG)

        error_handler = RotatingFileHandler(
            self.log_dir / f"{self.service_name}_error.log",
            maxBytes=5_242_880,  # 5MB
            backupCount=3
        )
        error_handler.setLevel(logging.ERROR)

        console_handler = logging.StreamHandler()
        console_handler.setLevel(logging.INFO)

        detailed_formatter = logging.Formatter(
            '%(asctime)s - %(name)s - [%(levelname)s] - '
            '%(funcName)s:%(lineno)d - %(message)s'
        )
        detailed_handler.setFormatter(detailed_formatter)
        error_handler.setFormatter(detailed_formatter)
        console_handler.setFormatter(detailed_formatter)

        self.logger = logging.getLogger(f"run.{self.service_name}")
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False
        for handler in self.logger.handlers:
            handler.close()
        self.logger.handlers = [detailed_handler, error_handler, console_handler]

    def debug(self, msg: str, **kwargs):
        """Log debug message with additional context"""
        self.logger.debug(f"{msg} {_context(kwargs)}", stacklevel=2)

    def info(self, msg: str, **kwargs):
        """Log info message with additional context"""
        self.logger.info(f"{msg} {_context(kwargs)}", stacklevel=2)

    def warning(self, msg: str, **kwargs):
        """Log warning message with additional context"""
        self.logger.warning(f"{msg} {_context(kwargs)}", stacklevel=2)

    def error(self, msg: str, error: Optional[Exception] = None, **kwargs):
        """Log error message with exception details and context"""
        error_details = {
            "error_type": type(error).__name__,
            "error_message": str(error),
            "traceback": "".join(traceback.format_exception(error)),
            **kwargs
        } if error else kwargs

        self.logger.error(f"{msg} {_context(error_details, indent=True)}", stacklevel=2)

    def close(self):
        """Release file handles held by this logger"""
        for handler in self.logger.handlers:
            handler.close()
        self.logger.handlers = []
