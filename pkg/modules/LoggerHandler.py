import json
import logging
import os
import sys
from dataclasses import dataclass, field
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, FrozenSet, Optional


PROJECT_ROOT = Path(__file__).resolve().parent.parent

LOGGER_NAME = "CylinderQuantumLab"
DEFAULT_RUN = "Core"
DEFAULT_FORMAT = "[%(asctime)s][%(name)s][%(levelname)s][%(run)s]: %(message)s"
DEFAULT_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
ALL_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class RunFormatter(logging.Formatter):
    """Fills the `run` field (command or pipeline stage) for records logged without one."""

    def format(self, record: logging.LogRecord) -> str:
        if getattr(record, "run", None) is None:
            record.run = DEFAULT_RUN
        return super().format(record)


@dataclass(frozen=True)
class LogSink:
    """One output of the lab logger, as declared in logger_config.json."""
    name: str
    levels: FrozenSet[int]
    filename: Optional[str] = None
    runs: FrozenSet[str] = field(default_factory=frozenset)
    clear_on_startup: bool = False

    @classmethod
    def from_config(cls, name: str, raw: Dict[str, Any]) -> "LogSink":
        levels = raw.get("levels") or ALL_LEVELS
        unknown = [level for level in levels if level not in ALL_LEVELS]
        if unknown:
            raise ValueError(f"Log sink '{name}' lists unknown levels: {unknown}")
        return cls(
            name=name,
            levels=frozenset(logging.getLevelName(level) for level in levels),
            filename=raw.get("filename"),
            runs=frozenset(raw.get("runs", ())),
            clear_on_startup=bool(raw.get("clear_on_startup", False)),
        )

    def accepts(self, record: logging.LogRecord) -> bool:
        if record.levelno not in self.levels:
            return False
        return not self.runs or getattr(record, "run", DEFAULT_RUN) in self.runs


class SinkFilter(logging.Filter):
    def __init__(self, sink: LogSink):
        super().__init__()
        self.sink = sink

    def filter(self, record: logging.LogRecord) -> bool:
        return self.sink.accepts(record)


class LabLogger:
    """
    Builds the project logger from a JSON description of its sinks.

    Every entry under "files" becomes a rotating file handler that keeps the
    listed levels and, when "runs" is given, only records from those stages
    (this is how Numerics.log collects the warnings of the solvers).
    "console" goes to stderr, the diagnostic stream of the CLI.
    CYLQ_LOG_DIR overrides "log_directory".
    """

    def __init__(self, config_path: str = "logger_config.json"):
        self.config = self._load_config(config_path)
        self.log_directory = Path(os.getenv("CYLQ_LOG_DIR") or self.config.get("log_directory", "logs"))
        self.log_directory.mkdir(parents=True, exist_ok=True)

        rotation = self.config.get("rotation", {})
        self.max_bytes = int(rotation.get("max_bytes", 10 * 1024 * 1024))
        self.backup_count = int(rotation.get("backup_count", 5))

        self.logger = logging.getLogger(self.config.get("logger_name", LOGGER_NAME))
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False
        for handler in list(self.logger.handlers):
            handler.close()
            self.logger.removeHandler(handler)

        self.sinks = {name: LogSink.from_config(name, raw) for name, raw in self.config.get("files", {}).items()}
        for sink in self.sinks.values():
            self._attach(self._file_handler(sink), sink)

        console = self.config.get("console", {})
        if console.get("enabled", True):
            sink = LogSink.from_config("console", console)
            self._attach(logging.StreamHandler(sys.stderr), sink)

    @staticmethod
    def _load_config(config_path: str) -> Dict[str, Any]:
        path = Path(config_path)
        if not path.exists() and not path.is_absolute():
            path = PROJECT_ROOT / config_path
        if not path.exists():
            raise FileNotFoundError(f"Logger configuration file not found: {config_path}")
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)

    def _file_handler(self, sink: LogSink) -> logging.Handler:
        if not sink.filename:
            raise ValueError(f"Log sink '{sink.name}' has no filename")
        path = self.log_directory / sink.filename
        if sink.clear_on_startup and path.exists():
            path.write_text("", encoding="utf-8")
        return RotatingFileHandler(path, maxBytes=self.max_bytes, backupCount=self.backup_count, encoding="utf-8")

    def _attach(self, handler: logging.Handler, sink: LogSink):
        kind = "console" if sink.name == "console" else "file"
        handler.setFormatter(RunFormatter(
            self.config.get("format", {}).get(kind, DEFAULT_FORMAT),
            datefmt=self.config.get("date_format", DEFAULT_DATE_FORMAT),
        ))
        handler.setLevel(min(sink.levels))
        handler.addFilter(SinkFilter(sink))
        self.logger.addHandler(handler)

    def get_logger(self) -> logging.Logger:
        return self.logger


_lab_logger: Optional[LabLogger] = None


def get_logger(config_path: str = "logger_config.json") -> logging.Logger:
    """Return the project logger, building it on first use."""
    global _lab_logger
    if _lab_logger is None:
        _lab_logger = LabLogger(config_path)
    return _lab_logger.get_logger()


def init_logger(config_path: str = "logger_config.json") -> LabLogger:
    """(Re)build the project logger from `config_path`; called once by app.py."""
    global _lab_logger
    _lab_logger = LabLogger(config_path)
    return _lab_logger
