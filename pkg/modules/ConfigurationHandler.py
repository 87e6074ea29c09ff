import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

from modules.LoggerHandler import get_logger
from modules.utils import ConfigurationError, ProcessCommand

logger = get_logger()


INT_KEYS = {"ell", "series_degree", "series_order", "quad_nodes", "fock_dim", "n_phi", "n_z"}
FLOAT_KEYS = {"b", "epsilon", "z_min", "z_max"}
ALLOWED_KEYS = INT_KEYS | FLOAT_KEYS


@dataclass(frozen=True)
class PhysicsConfig:
    """
    Dimensionless run parameters in natural units (hbar = m = omega = 1).

    b is the spacing between neighbouring oscillator centres, epsilon the spin
    coupling and ell the angular mode. The remaining fields are truncation and
    sampling controls.
    """

    b: float = 2.0
    epsilon: float = 0.5
    ell: int = 0
    series_degree: int = 64
    series_order: int = 2
    quad_nodes: int = 64
    fock_dim: int = 60
    z_range: Tuple[float, float] = (-12.0, 6.0)
    n_phi: int = 256
    n_z: int = 512

    @property
    def z_min(self) -> float:
        return self.z_range[0]

    @property
    def z_max(self) -> float:
        return self.z_range[1]

    def z_samples(self) -> np.ndarray:
        return np.linspace(self.z_min, self.z_max, self.n_z)

    def phi_samples(self) -> np.ndarray:
        return np.linspace(0.0, 2.0 * np.pi, self.n_phi, endpoint=False)

    def as_dict(self) -> Dict[str, Any]:
        """Flat key-value view using the config-file key names."""
        data = asdict(self)
        z_min, z_max = data.pop("z_range")
        data["z_min"] = float(z_min)
        data["z_max"] = float(z_max)
        return dict(sorted(data.items()))


def validate(config: PhysicsConfig) -> PhysicsConfig:
    """Return the config unchanged, or raise ConfigurationError naming the first violated invariant."""
    if not (math.isfinite(config.b) and config.b > 0):
        raise ConfigurationError("b must be positive")
    if not math.isfinite(config.epsilon):
        raise ConfigurationError("epsilon must be finite")
    if config.series_degree < 1:
        raise ConfigurationError("series_degree must be at least 1")
    if config.series_order < 0:
        raise ConfigurationError("series_order must be non-negative")
    if config.quad_nodes < 2:
        raise ConfigurationError("quad_nodes must be at least 2")
    if config.fock_dim < config.series_order + 2:
        raise ConfigurationError("fock_dim too small")
    if config.n_phi < 2 or config.n_z < 2:
        raise ConfigurationError("grid must be at least 2x2")
    z_min, z_max = config.z_range
    if not (math.isfinite(z_min) and math.isfinite(z_max) and z_min < z_max):
        raise ConfigurationError("z_range must be finite and nonempty")
    return config


def _coerce(key: str, value: Any) -> Any:
    if key not in ALLOWED_KEYS:
        raise ConfigurationError(f"unknown configuration key '{key}'")
    try:
        if key in INT_KEYS:
            number = float(value)
            if not number.is_integer():
                raise ValueError(value)
            return int(number)
        return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"invalid value for '{key}': {value!r}")


def from_mapping(values: Mapping[str, Any], base: Optional[PhysicsConfig] = None) -> PhysicsConfig:
    """Build a validated config from flat key-value pairs layered over ``base`` (defaults if omitted)."""
    base = base or PhysicsConfig()
    updates: Dict[str, Any] = {}
    z_min, z_max = base.z_range
    for key, raw in values.items():
        value = _coerce(key, raw)
        if key == "z_min":
            z_min = value
        elif key == "z_max":
            z_max = value
        else:
            updates[key] = value
    return validate(replace(base, z_range=(z_min, z_max), **updates))


def with_overrides(config: PhysicsConfig, **overrides: Any) -> PhysicsConfig:
    """Copy of ``config`` with the given keys replaced; None values are ignored."""
    return from_mapping({key: value for key, value in overrides.items() if value is not None}, base=config)


def parse_config_text(text: str, source: str = "<string>") -> Dict[str, str]:
    values: Dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{number}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in ALLOWED_KEYS:
            raise ConfigurationError(f"unknown configuration key '{key}' ({source}:{number})")
        values[key] = value
    return values


def load_config(path: Optional[Path] = None, base: Optional[PhysicsConfig] = None) -> PhysicsConfig:
    """Read a ``key = value`` config file over the defaults. No path means defaults only."""
    if path is None:
        return validate(base or PhysicsConfig())
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        values = parse_config_text(f.read(), source=str(path))
    logger.debug(f"Loaded {len(values)} configuration keys from {path}", extra={"run": "Core"})
    return from_mapping(values, base=base)


def parse_grid(text: str) -> Tuple[int, int]:
    """Parse a grid flag of the form ``NPHIxNZ``."""
    try:
        n_phi, n_z = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise ConfigurationError(f"grid must look like NPHIxNZ, got {text!r}")
    return n_phi, n_z


def config_from_args(args) -> PhysicsConfig:
    """Defaults < the command's own base values < config file < command-line flags."""
    base = from_mapping(getattr(args, "command_base", None) or {})
    config = load_config(getattr(args, "config", None), base=base)
    overrides: Dict[str, Any] = {
        "b": getattr(args, "b", None),
        "epsilon": getattr(args, "epsilon", None),
        "ell": getattr(args, "ell", None),
        "series_order": getattr(args, "order", None),
    }
    grid = getattr(args, "grid", None)
    if grid:
        overrides["n_phi"], overrides["n_z"] = parse_grid(grid)
    return with_overrides(config, **overrides)


def register_setup(lab):
    @lab.tree.command(
        name="config",
        description="Print the effective configuration after defaults, config file and flags"
    )
    @ProcessCommand(lab, needs_output=False)
    def config_cmd(args, config: PhysicsConfig):
        for key, value in config.as_dict().items():
            print(f"{key} = {value}")

    logger.debug("Config command registered successfully", extra={"run": "Core"})


__all__ = [
    "PhysicsConfig",
    "validate",
    "from_mapping",
    "with_overrides",
    "load_config",
    "parse_config_text",
    "parse_grid",
    "config_from_args",
    "register_setup",
]
