import logging
import logging.config
from pathlib import Path

LOG_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"


def setup_logging(level: str | int = "INFO", log_file: Path | None = None) -> None:
    """
    Configure the root logger with a console handler and an optional file handler.

    Args:
        level (str | int): Logging level name or number. Defaults to "INFO".
        log_file (Path, optional): Also append records to this file. Defaults to None.
    """
    if isinstance(level, str):
        level = level.upper()

    handlers = {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
            "stream": "ext://sys.stderr",
        }
    }
    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers["file"] = {
            "class": "logging.FileHandler",
            "formatter": "plain",
            "filename": str(log_file),
            "encoding": "utf-8",
        }

    logging.config.dictConfig(
        {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {"plain": {"format": LOG_FORMAT}},
            "handlers": handlers,
            "root": {"level": level, "handlers": list(handlers)},
        }
    )
