import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from modules.BasisHandler import PI_QUARTER
from modules.LoggerHandler import get_logger
from modules.utils import ConfigurationError, PeakOverlapError

logger = get_logger()

SEPARATION_WIDTHS = 4.0
PEAK_OVERLAP_TOLERANCE = 1e-8
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

NAMED_PROFILES: Dict[str, Dict[int, complex]] = {
    "const": {0: 1.0},
    "cos": {-1: 0.5, 1: 0.5},
    "sin": {-1: 0.5j, 1: -0.5j},
    "staircase": {0: 1.0, -1: 1.0, -2: 1.5, -3: 1.0},
}


@dataclass(frozen=True)
class AngularProfile:
    """f(phi) = sum over ell of f_ell exp(i ell phi)."""

    modes: Mapping[int, complex]

    def __post_init__(self):
        object.__setattr__(self, "modes", {int(ell): complex(value) for ell, value in sorted(self.modes.items())})

    @property
    def max_mode(self) -> int:
        return max((abs(ell) for ell in self.modes), default=0)

    def __call__(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        return sum(value * np.exp(1j * ell * phi) for ell, value in self.modes.items())

    def scaled(self, factor: complex) -> "AngularProfile":
        return AngularProfile({ell: factor * value for ell, value in self.modes.items()})

    def weight(self) -> float:
        return float(sum(abs(value) ** 2 for value in self.modes.values()))

    @classmethod
    def from_samples(cls, samples, max_mode: Optional[int] = None, cutoff: float = 1e-12) -> "AngularProfile":
        """Modes of f sampled at phi_j = 2 pi j / M; coefficients below ``cutoff`` are dropped."""
        samples = np.asarray(samples, dtype=complex)
        count = samples.size
        coefficients = np.fft.fft(samples) / count
        ells = np.fft.fftfreq(count, d=1.0 / count).astype(int)
        modes = {
            int(ell): complex(value)
            for ell, value in zip(ells, coefficients)
            if abs(value) > cutoff and (max_mode is None or abs(ell) <= max_mode)
        }
        return cls(modes)

    @classmethod
    def named(cls, name: str) -> "AngularProfile":
        """
        A profile by name: const, cos, sin, staircase, or ``modes:ell=value,...``
        with Python complex literals (``modes:0=1,-2=1.5``).
        """
        key = name.strip().lower()
        if key in NAMED_PROFILES:
            return cls(NAMED_PROFILES[key])
        if key.startswith("modes:"):
            modes = {}
            for item in key[len("modes:"):].split(","):
                if not item.strip():
                    continue
                try:
                    ell, value = item.split("=", 1)
                    modes[int(ell)] = complex(value.strip().replace("i", "j"))
                except ValueError:
                    raise ConfigurationError(f"cannot parse profile mode {item!r}")
            if not modes:
                raise ConfigurationError("profile needs at least one mode")
            return cls(modes)
        raise ConfigurationError(
            f"unknown profile {name!r}; use one of {', '.join(NAMED_PROFILES)} or modes:ell=value,..."
        )


@dataclass(frozen=True)
class ComplexField:
    """
    Complex amplitude on a (phi, z) grid.

    ``samples`` has shape (components, n_z, n_phi): one component for a spinless
    wavefunction, two for a spinor.
    """

    samples: np.ndarray
    phi: np.ndarray
    z: np.ndarray
    t: float = 0.0
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def components(self) -> int:
        return self.samples.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.samples.shape[1], self.samples.shape[2]

    def density(self) -> np.ndarray:
        """|Psi|^2 summed over components, shape (n_z, n_phi)."""
        return np.sum(np.abs(self.samples) ** 2, axis=0)

    def _integrate(self, values: np.ndarray) -> float:
        # periodic rectangle rule in phi, trapezoid in z
        d_phi = 2.0 * math.pi / self.phi.size
        return float(trapezoid(values.sum(axis=1) * d_phi, self.z))

    def norm(self) -> float:
        return self._integrate(self.density())

    def magnitude(self) -> np.ndarray:
        return np.abs(self.samples)


def energy(n: int, ell: int = 0) -> float:
    """E = n + 1/2, independent of ell."""
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    return n + 0.5


def coherent_evolution(ell: int, b: float, t: float, phi, z) -> np.ndarray:
    """
    Mode ell released as a Gaussian at z = 0, at time t.

    The state oscillates about its centre -ell*b. The global phase
    exp(i ell^2 b^2 sin(2t)/4) is not included (see ``omitted_phase``).
    """
    phi = np.asarray(phi, dtype=float)
    z = np.asarray(z, dtype=float)
    shift = ell * b
    return (
        PI_QUARTER
        * np.exp(-0.5j * t)
        * np.exp(-1j * (z + shift) * shift * math.sin(t))
        * np.exp(-0.5 * (z + shift * (1.0 - math.cos(t))) ** 2)
        * INV_SQRT_2PI
        * np.exp(1j * ell * phi)
    )


def omitted_phase(ell: int, b: float, t: float) -> complex:
    """Global phase dropped from ``coherent_evolution``; exact state = formula times this."""
    return complex(np.exp(0.25j * ell * ell * b * b * math.sin(2.0 * t)))


def readout_position(ell: int, b: float, t: float = math.pi) -> float:
    """Centre of mode ell at time t: z = -ell*b*(1 - cos t)."""
    return -ell * b * (1.0 - math.cos(t))


def fourier_transform_protocol(profile: AngularProfile, b: float, t: float, phi, z) -> ComplexField:
    """Superposition of the coherent modes of ``profile``; at t = pi mode ell sits at z = -2 ell b."""
    if b < SEPARATION_WIDTHS:
        logger.warning(
            f"b={b} is below {SEPARATION_WIDTHS} Gaussian widths; Fourier peaks will overlap at t=pi",
            extra={"run": "Fourier"},
        )
    phi = np.asarray(phi, dtype=float)
    z = np.asarray(z, dtype=float)
    grid_phi = phi[None, :]
    grid_z = z[:, None]
    samples = np.zeros((z.size, phi.size), dtype=complex)
    for ell, value in profile.modes.items():
        samples += value * coherent_evolution(ell, b, t, grid_phi, grid_z)
    return ComplexField(samples=samples[None, ...], phi=phi, z=z, t=t, metadata={"b": b, "modes": dict(profile.modes)})


def _log_parabola(z: np.ndarray, values: np.ndarray, target: float) -> float:
    """Value at ``target`` of the Gaussian through the three samples nearest to it."""
    centre = int(np.clip(np.argmin(np.abs(z - target)), 1, z.size - 2))
    window = slice(centre - 1, centre + 2)
    magnitudes = values[window]
    if np.any(magnitudes <= 0.0):
        return float(np.interp(target, z, values))
    coefficients = np.polyfit(z[window] - target, np.log(magnitudes), 2)
    return float(np.exp(coefficients[-1]))


def extract_modes(
    field: ComplexField,
    b: float,
    modes: Iterable[int],
    reference: Union[str, int, None] = "max",
) -> Dict[int, float]:
    """
    Read |Psi(phi = 0, z = -2 ell b)| for each ell from a field at t = pi.

    ``reference="max"`` scales by the largest reading, an integer scales by that
    mode's reading and None returns raw magnitudes.
    """
    modes = sorted(set(int(ell) for ell in modes))
    if len(modes) > 1:
        spacing = 2.0 * b * min(np.diff(modes))
        contamination = math.exp(-0.5 * spacing * spacing)
        if contamination > PEAK_OVERLAP_TOLERANCE:
            raise PeakOverlapError(
                f"peaks {spacing:.3g} apart overlap by {contamination:.2e} (tolerance {PEAK_OVERLAP_TOLERANCE:.0e}); increase b"
            )
    line = np.abs(field.samples[0, :, int(np.argmin(np.abs(np.mod(field.phi + math.pi, 2 * math.pi) - math.pi)))])
    readings = {}
    for ell in modes:
        target = readout_position(ell, b, field.t)
        if not field.z[0] <= target <= field.z[-1]:
            raise ConfigurationError(f"z_range must contain the read-out point z={target:g} of mode {ell}")
        readings[ell] = _log_parabola(field.z, line, target)
    if reference is None:
        return readings
    scale = max(readings.values()) if reference == "max" else readings[int(reference)]
    if scale == 0.0:
        return readings
    return {ell: value / scale for ell, value in readings.items()}


def readout_window(profile: AngularProfile, b: float, margin: float = 6.0) -> Tuple[float, float]:
    """A z interval containing every mode's trajectory with ``margin`` widths to spare."""
    positions = [0.0] + [readout_position(ell, b) for ell in profile.modes]
    return min(positions) - margin, max(positions) + margin


def classical_trajectory(v_z0: float, v_phi0: float, t):
    """Velocity rotating at unit frequency: (v_z, v_phi) at time t."""
    t = np.asarray(t, dtype=float)
    v_z = v_z0 * np.cos(t) - v_phi0 * np.sin(t)
    v_phi = v_z0 * np.sin(t) + v_phi0 * np.cos(t)
    return v_z, v_phi


def classical_position(v_z0: float, v_phi0: float, t, z0: float = 0.0):
    """z(t) from integrating ``classical_trajectory``; a mode ell starts with v_phi0 = ell*b."""
    t = np.asarray(t, dtype=float)
    return z0 + v_z0 * np.sin(t) + v_phi0 * (np.cos(t) - 1.0)


def centroid(field: ComplexField) -> float:
    density = field.density()
    return field._integrate(density * field.z[:, None]) / field._integrate(density)
