import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from modules.ConfigurationHandler import PhysicsConfig
from modules.LoggerHandler import get_logger
from modules.SeriesHandler import PerturbationSolution, solve_perturbation
from modules.SpinlessHandler import ComplexField, INV_SQRT_2PI
from modules.spinor import Branch, SpinorProfile

logger = get_logger()


@dataclass(frozen=True)
class SpinField:
    """Density and spin direction along z for a fixed azimuth phi."""

    z: np.ndarray
    rho: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    phi: float
    interpolated: np.ndarray

    def direction(self) -> np.ndarray:
        """Unit spin vector (x, y, z) per sample, shape (n_z, 3)."""
        return np.stack(
            [
                np.sin(self.alpha) * np.cos(self.beta),
                np.sin(self.alpha) * np.sin(self.beta),
                np.cos(self.alpha),
            ],
            axis=-1,
        )

    def radial_component(self) -> np.ndarray:
        """Projection of the spin on the outward normal of the cylinder at phi."""
        return np.sin(self.alpha) * np.cos(self.beta - self.phi)


def spin_field(profile: SpinorProfile, phi: float = 0.0) -> SpinField:
    """
    rho = sqrt(Z+^2 + Z-^2), alpha = 2 arctan(|Z-|/|Z+|), beta = phi + arg(Z-/Z+).

    Where both components vanish alpha is interpolated from the neighbouring
    samples and the sample is flagged.
    """
    zplus = np.asarray(profile.zplus)
    zminus = np.asarray(profile.zminus)
    rho = np.sqrt(np.abs(zplus) ** 2 + np.abs(zminus) ** 2)
    alpha = 2.0 * np.arctan2(np.abs(zminus), np.abs(zplus))
    beta = phi + np.angle(zminus * np.conj(zplus))
    interpolated = rho == 0.0
    if np.any(interpolated):
        good = ~interpolated
        if not np.any(good):
            raise ValueError("spinor vanishes at every sample")
        alpha = alpha.copy()
        alpha[interpolated] = np.interp(profile.z_samples[interpolated], profile.z_samples[good], alpha[good])
        logger.warning(f"Spin angle interpolated at {int(np.sum(interpolated))} samples where the spinor vanishes",
                       extra={"run": "Spin"})
    return SpinField(z=profile.z_samples, rho=rho, alpha=alpha, beta=beta, phi=phi, interpolated=interpolated)


def branch_solutions(config: PhysicsConfig, solution: Optional[PerturbationSolution] = None):
    solution = solution or solve_perturbation(0, config.series_order, Branch.SYMMETRIC, config)
    return solution.with_branch(Branch.SYMMETRIC), solution.with_branch(Branch.ANTISYMMETRIC)


def eigen_energies(config: PhysicsConfig, solution: Optional[PerturbationSolution] = None) -> Tuple[float, float]:
    """E_s = sum eps^k E_0^(k), E_a = sum (-eps)^k E_0^(k)."""
    symmetric, antisymmetric = branch_solutions(config, solution)
    return symmetric.energy(config.epsilon), antisymmetric.energy(config.epsilon)


def density_peaks(profile: SpinorProfile, count: int = 2) -> np.ndarray:
    """Positions of the ``count`` highest local maxima of rho^2, refined by a parabola, sorted."""
    density = profile.density()
    z = profile.z_samples
    interior = np.flatnonzero((density[1:-1] > density[:-2]) & (density[1:-1] >= density[2:])) + 1
    best = interior[np.argsort(density[interior])[::-1][:count]]
    peaks = []
    for i in best:
        window = slice(i - 1, i + 2)
        a, b_, _ = np.polyfit(z[window], density[window], 2)
        peaks.append(-b_ / (2.0 * a))
    return np.sort(np.array(peaks))


def peak_separation(profile: SpinorProfile) -> float:
    """Distance between the two highest density maxima; 0 once they have merged into one."""
    peaks = density_peaks(profile, count=2)
    if peaks.size < 2:
        logger.info(f"Density maxima merged ({peaks.size} found)", extra={"run": "Spin"})
        return 0.0
    return float(peaks[1] - peaks[0])


def sign_changes(values: np.ndarray, z: np.ndarray, threshold: float = 0.0) -> np.ndarray:
    """z locations where ``values`` crosses zero, found by linear interpolation between samples."""
    values = np.asarray(values)
    idx = np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)
    idx = idx[np.maximum(np.abs(values[idx]), np.abs(values[idx + 1])) > threshold]
    return z[idx] - values[idx] * (z[idx + 1] - z[idx]) / (values[idx + 1] - values[idx])


@dataclass(frozen=True)
class TwoStateSystem:
    """
    Symmetric and antisymmetric ground states s, a in the basis
    up = (s - a)/sqrt 2 (upper well) and down = (s + a)/sqrt 2 (spin down at z = -b).

    The initial amplitudes refer to that basis and must be normalized.
    """

    E_s: float
    E_a: float
    initial_up: complex = 0.0
    initial_down: complex = 1.0

    def __post_init__(self):
        weight = abs(self.initial_up) ** 2 + abs(self.initial_down) ** 2
        if not math.isclose(weight, 1.0, abs_tol=1e-12):
            raise ValueError(f"initial state must be normalized, got |up|^2 + |down|^2 = {weight:.6g}")

    @property
    def omega(self) -> float:
        return 0.5 * (self.E_s - self.E_a)

    @property
    def mean_energy(self) -> float:
        return 0.5 * (self.E_s + self.E_a)

    def period(self) -> float:
        return math.pi / abs(self.omega) if self.omega else math.inf


def rabi_evolution(system: TwoStateSystem, t):
    """
    (amp_up, amp_down) at time t, from H = mean_energy + omega * sigma_x in the (up, down) basis.

    Starting spin down this is (-i sin(Omega t), cos(Omega t)) times exp(-i (E_s + E_a) t / 2).
    """
    t = np.asarray(t, dtype=float)
    phase = np.exp(-1j * system.mean_energy * t)
    cos, sin = np.cos(system.omega * t), np.sin(system.omega * t)
    up, down = system.initial_up, system.initial_down
    return (cos * up - 1j * sin * down) * phase, (cos * down - 1j * sin * up) * phase


@dataclass(frozen=True)
class TwoStateSpinor:
    z: np.ndarray
    zplus: np.ndarray
    zminus: np.ndarray
    mean_z: float


def rabi_spinor(system: TwoStateSystem, symmetric: SpinorProfile, antisymmetric: SpinorProfile, t: float) -> TwoStateSpinor:
    """The evolved two-state superposition on the z grid, with its mean position."""
    c_s = (system.initial_up + system.initial_down) / math.sqrt(2.0)
    c_a = (system.initial_down - system.initial_up) / math.sqrt(2.0)
    s_phase = c_s * np.exp(-1j * system.E_s * t)
    a_phase = c_a * np.exp(-1j * system.E_a * t)
    zplus = s_phase * symmetric.zplus + a_phase * antisymmetric.zplus
    zminus = s_phase * symmetric.zminus + a_phase * antisymmetric.zminus
    z = symmetric.z_samples
    density = np.abs(zplus) ** 2 + np.abs(zminus) ** 2
    mean_z = float(trapezoid(z * density, z) / trapezoid(density, z))
    return TwoStateSpinor(z=z, zplus=zplus, zminus=zminus, mean_z=mean_z)


def assemble_cylinder_spinor(profile: SpinorProfile, phi) -> ComplexField:
    """Psi+ = e^{i ell phi} Z+ / sqrt(2 pi), Psi- = e^{i (ell+1) phi} Z- / sqrt(2 pi)."""
    phi = np.asarray(phi, dtype=float)
    up = INV_SQRT_2PI * np.exp(1j * profile.ell * phi)[None, :] * profile.zplus[:, None]
    down = INV_SQRT_2PI * np.exp(1j * (profile.ell + 1) * phi)[None, :] * profile.zminus[:, None]
    return ComplexField(
        samples=np.stack([up, down]),
        phi=phi,
        z=profile.z_samples,
        metadata={"branch": profile.branch.value, "energy": profile.energy, "ell": profile.ell},
    )
