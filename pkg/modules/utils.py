from functools import wraps
import hashlib
import inspect
import json
import os
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
import psutil

from modules.LoggerHandler import get_logger, PROJECT_ROOT

logger = get_logger()

PROJECT_CONFIG_FILE = PROJECT_ROOT / "project.json"
CSV_FLOAT_FORMAT = "%.17g"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONVERGENCE = 2


class ConfigurationError(ValueError):
    """A configuration invariant is violated; the message names it."""


class PeakOverlapError(ValueError):
    """Fourier read-out peaks are too close to be separated."""


class FrameRenderError(ValueError):
    """A field sample cannot be rendered."""


class ConvergenceError(RuntimeError):
    """A numerical result failed its built-in convergence or consistency check."""


class CrossCheckError(ConvergenceError):
    pass


class QuadratureConvergenceError(ConvergenceError):
    pass


class SeriesTruncationError(ConvergenceError):
    pass


class EigenSolverError(ConvergenceError):
    pass


def read_project_config() -> Dict[str, Any]:
    """Read project metadata from project.json."""
    default_config = {
        "name": "Cylinder Quantum Lab",
        "description": "Charged particle on a cylinder in a radial magnetic field",
        "version": "0.0.0"
    }
    if not PROJECT_CONFIG_FILE.exists():
        return default_config
    try:
        with open(PROJECT_CONFIG_FILE, "r", encoding="utf-8") as f:
            return json.load(f)
    except Exception as e:
        logger.error(f"Failed to read project config: {e}", extra={"run": "Core"})
        return default_config


def write_json(path: Path, payload: Dict[str, Any]) -> None:
    """Write a JSON document with sorted keys so repeated runs produce identical bytes."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2, ensure_ascii=False, sort_keys=True)
        f.write("\n")


def write_csv(path: Path, columns: Mapping[str, Sequence[float]], comment: Optional[str] = None) -> Path:
    """
    Write equal-length columns as UTF-8 CSV at full precision.

    The first line is a '#'-prefixed comment (free text), the second a
    '#'-prefixed comma-separated list of column names in file order.
    """
    names = list(columns)
    data = np.column_stack([np.asarray(columns[name], dtype=float) for name in names])
    header_lines = []
    if comment:
        header_lines.append(comment)
    header_lines.append(",".join(names))
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, data, fmt=CSV_FLOAT_FORMAT, delimiter=",", header="\n".join(header_lines),
               comments="# ", encoding="utf-8")
    return path


def read_csv(path: Path) -> Dict[str, np.ndarray]:
    """Parse a CSV written by write_csv back into named columns."""
    with open(path, "r", encoding="utf-8") as f:
        header = [line[2:].rstrip("\n") for line in f if line.startswith("# ")]
    names = header[-1].split(",")
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, encoding="utf-8")
    return {name: data[:, i] for i, name in enumerate(names)}


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _get_env_int(var_name: str, default: int) -> int:
    """Safely read an integer environment variable."""
    value = os.getenv(var_name)
    if not value:
        return default
    try:
        return int(value)
    except (TypeError, ValueError):
        logger.warning(f"Environment variable {var_name} is not a valid integer.", extra={"run": "Core"})
        return default


class RunMetrics:
    """Wall time and resident memory of the current process over one command."""

    def __init__(self):
        self.process = psutil.Process(os.getpid())
        self.start_time = time.perf_counter()

    def snapshot(self) -> Dict[str, float]:
        try:
            memory_mb = self.process.memory_info().rss / (1024 * 1024)
        except Exception:
            memory_mb = 0.0
        return {
            "elapsed_s": round(time.perf_counter() - self.start_time, 3),
            "memory_mb": round(memory_mb, 1),
        }


def ProcessCommand(lab, needs_output: bool = True):
    """
    Decorator turning a command body into a CLI handler returning an exit code.

    The wrapped function receives the parsed ``argparse.Namespace`` as its first
    argument. Parameters named ``config`` and ``out`` are injected when present
    in its signature: the validated ``PhysicsConfig`` and the command's output
    directory.

    Exit codes:
        0  success
        1  validation failure (ConfigurationError, PeakOverlapError, FrameRenderError
           or any other ValueError raised on bad input)
        2  convergence or cross-check failure (ConvergenceError and subclasses)
    """
    def decorator(func: Callable[..., Any]):
        signature = inspect.signature(func)
        default_args = [param.name for param in signature.parameters.values() if param.name in ["config", "out"]]

        @wraps(func)
        def cli_wrapper(args) -> int:
            return _process_command_impl(func, lab, args, default_args, needs_output)

        return cli_wrapper

    return decorator


def _process_command_impl(
    func: Callable[..., Any],
    lab,
    args,
    default_args: List[str],
    needs_output: bool,
) -> int:
    """Internal implementation of command processing."""
    command_name = getattr(args, "command", None) or func.__name__
    command_args = {key: value for key, value in vars(args).items() if key not in ("handler", "command")}
    logger.info(f"Command invoked: {command_name}", extra={"run": command_name})
    logger.debug(f"Command arguments: {command_args}", extra={"run": command_name})

    metrics = RunMetrics()
    try:
        call_args = {}
        if "config" in default_args:
            call_args["config"] = lab.resolve_config(args)
        if "out" in default_args or needs_output:
            out = lab.resolve_output(args, command_name)
            if "out" in default_args:
                call_args["out"] = out
        func(args, **call_args)
    except (ConfigurationError, PeakOverlapError, FrameRenderError) as e:
        logger.error(f"Validation failed in {command_name}: {e}", extra={"run": command_name})
        return EXIT_VALIDATION
    except ConvergenceError as e:
        logger.error(f"Convergence check failed in {command_name}: {e}", extra={"run": command_name}, exc_info=True)
        return EXIT_CONVERGENCE
    except ValueError as e:
        logger.error(f"Invalid input in {command_name}: {e}", extra={"run": command_name}, exc_info=True)
        return EXIT_VALIDATION
    finally:
        logger.info(f"Command {command_name} resources: {metrics.snapshot()}", extra={"run": command_name})
    logger.info(f"Command {command_name} completed", extra={"run": command_name})
    return EXIT_OK
