"""
Brute-force reference values.

The coupled two-component problem is diagonalized in a truncated Fock basis
with an in-repo Jacobi solver, and spinless time evolution is resummed in the
displaced eigenbasis. Hermite functions here come from scipy rather than the
recurrence used elsewhere, so the two paths share no kernels.
"""
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_hermite, gammaln

from modules.BasisHandler import build_overlap_matrix
from modules.ConfigurationHandler import PhysicsConfig
from modules.LoggerHandler import get_logger
from modules.utils import EigenSolverError, SeriesTruncationError

logger = get_logger()

JACOBI_TOLERANCE = 1e-14
JACOBI_MAX_SWEEPS = 60
RESIDUAL_TOLERANCE = 1e-10
LARGE_THETA = 1e150
COEFFICIENT_TAIL_TOLERANCE = 1e-12
RESIDUAL_FLOOR = 1e-13


@dataclass(frozen=True)
class CoupledFockMatrix:
    """
    [[diag(n+1/2), eps T^T], [eps T, diag(n+1/2)]].

    The first block is Z+ in levels centred at 0, the second Z- in levels
    centred at -b; T is the displaced overlap matrix.
    """

    entries: np.ndarray
    N: int
    b: float
    epsilon: float

    @property
    def dimension(self) -> int:
        return 2 * self.N

    def is_symmetric(self, tolerance: float = 1e-14) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.T)) <= tolerance)


def build_coupled_matrix(config: PhysicsConfig, epsilon: Optional[float] = None, N: Optional[int] = None) -> CoupledFockMatrix:
    epsilon = config.epsilon if epsilon is None else epsilon
    N = N or config.fock_dim
    overlap = build_overlap_matrix(N, config.b).entries
    ladder = np.diag(np.arange(N) + 0.5)
    entries = np.block([[ladder, epsilon * overlap.T], [epsilon * overlap, ladder]])
    return CoupledFockMatrix(entries=entries, N=N, b=config.b, epsilon=epsilon)


def _off_norm(A: np.ndarray) -> float:
    """Frobenius norm of the off-diagonal part, summed directly over the strict upper triangle."""
    return math.sqrt(2.0 * float(np.sum(np.triu(A, 1) ** 2)))


def _rotation_tangent(app: float, aqq: float, apq: float) -> float:
    theta = (aqq - app) / (2.0 * apq)
    if abs(theta) > LARGE_THETA:
        return 0.5 / theta
    return math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))


def jacobi_eigh(matrix: np.ndarray, tolerance: float = JACOBI_TOLERANCE, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """
    Cyclic Jacobi rotations on a real symmetric matrix.

    Returns unsorted (eigenvalues, eigenvectors as columns). Sweeps stop once the
    off-diagonal Frobenius norm falls below ``tolerance`` times the full norm.
    An element too small to change either diagonal entry in double precision is
    zeroed instead of rotated.
    """
    A = np.array(matrix, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(float(np.linalg.norm(A)), 1e-300)
    for sweep in range(max_sweeps):
        off = _off_norm(A)
        if off <= tolerance * scale:
            logger.debug(f"Jacobi converged after {sweep} sweeps (n={n}, off={off:.2e})", extra={"run": "Oracle"})
            return np.diag(A).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                app = A[p, p]
                aqq = A[q, q]
                g = 100.0 * abs(apq)
                if abs(app) + g == abs(app) and abs(aqq) + g == abs(aqq):
                    A[p, q] = A[q, p] = 0.0
                    continue
                t = _rotation_tangent(app, aqq, apq)
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                A[p, :] = A[:, p]
                A[q, :] = A[:, q]
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = A[q, p] = 0.0
                v_p = V[:, p].copy()
                v_q = V[:, q].copy()
                V[:, p] = c * v_p - s * v_q
                V[:, q] = s * v_p + c * v_q
    raise EigenSolverError(
        f"Jacobi eigensolver did not converge in {max_sweeps} sweeps (n={n}, off={_off_norm(A):.2e})"
    )


def exact_spectrum(matrix) -> Tuple[np.ndarray, np.ndarray]:
    """
    Ascending eigenvalues and matching eigenvector columns.

    Every pair must satisfy ||Hv - lv|| < RESIDUAL_TOLERANCE * max(1, ||H||_2).
    """
    H = matrix.entries if isinstance(matrix, CoupledFockMatrix) else np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(H)):
        raise EigenSolverError("matrix has non-finite entries")
    values, vectors = jacobi_eigh(H)
    order = np.argsort(values, kind="stable")
    values, vectors = values[order], vectors[:, order]
    residuals = np.linalg.norm(H @ vectors - vectors * values, axis=0)
    worst = float(np.max(residuals))
    limit = RESIDUAL_TOLERANCE * max(1.0, float(np.max(np.abs(values))))
    if worst >= limit:
        raise EigenSolverError(f"eigenpair residual {worst:.3e} exceeds {limit:.1e}")
    return values, vectors


def parity_operator(N: int) -> np.ndarray:
    """
    The involution (Z+, Z-)(z) -> (Z-(-z-b), Z+(-z-b)) in the two-block basis:
    [[0, Pi], [Pi, 0]] with Pi = diag((-1)^n). Symmetric states have eigenvalue +1.
    """
    reflection = np.diag((-1.0) ** np.arange(N))
    zero = np.zeros((N, N))
    return np.block([[zero, reflection], [reflection, zero]])


def branch_energies(config: PhysicsConfig, epsilon: Optional[float] = None, N: Optional[int] = None) -> Tuple[float, float]:
    """(E_s, E_a) of the lowest pair, classified by the parity of each eigenvector."""
    matrix = build_coupled_matrix(config, epsilon, N)
    values, vectors = exact_spectrum(matrix)
    parity = parity_operator(matrix.N)
    lowest = [(float(values[i]), float(vectors[:, i] @ parity @ vectors[:, i])) for i in range(2)]
    if abs(lowest[0][0] - lowest[1][0]) < RESIDUAL_TOLERANCE:
        return lowest[0][0], lowest[1][0]
    symmetric = max(lowest, key=lambda pair: pair[1])
    antisymmetric = min(lowest, key=lambda pair: pair[1])
    return symmetric[0], antisymmetric[0]


def _oracle_hermite_functions(N: int, x: np.ndarray) -> np.ndarray:
    n = np.arange(N)[:, None]
    log_norm = -0.5 * (n * math.log(2.0) + gammaln(n + 1) + 0.5 * math.log(math.pi))
    return eval_hermite(n, x[None, :]) * np.exp(log_norm - 0.5 * x[None, :] ** 2)


def displaced_coefficients(ell: int, b: float, N: int) -> np.ndarray:
    """<level n centred at -ell*b | centred ground state> = e^{-(ell b)^2/4} (ell b/sqrt 2)^n / sqrt(n!)."""
    d = ell * b / math.sqrt(2.0)
    n = np.arange(N)
    if d == 0.0:
        return (n == 0).astype(float)
    magnitude = np.exp(n * math.log(abs(d)) - 0.25 * (ell * b) ** 2 - 0.5 * gammaln(n + 1))
    return magnitude * np.sign(d) ** n


def eigenbasis_evolution(ell: int, b: float, t: float, z_samples, phi: float = 0.0, N: int = 60) -> np.ndarray:
    """
    Mode ell released as a Gaussian at z = 0, resummed over levels centred at -ell*b
    with phases exp(-i (n + 1/2) t). Includes every phase.
    """
    coefficients = displaced_coefficients(ell, b, N)
    if abs(coefficients[-1]) >= COEFFICIENT_TAIL_TOLERANCE:
        raise SeriesTruncationError(f"eigenbasis expansion tail {abs(coefficients[-1]):.2e} with N={N}")
    z = np.asarray(z_samples, dtype=float)
    basis = _oracle_hermite_functions(N, z.ravel() + ell * b)
    amplitudes = coefficients * np.exp(-1j * (np.arange(N) + 0.5) * t)
    angular = np.exp(1j * ell * phi) / math.sqrt(2.0 * math.pi)
    return (angular * (amplitudes @ basis)).reshape(z.shape)


@dataclass(frozen=True)
class RichardsonResult:
    slope: float
    residuals: np.ndarray
    indistinguishable: bool

    def within(self, low: float, high: float) -> bool:
        return self.indistinguishable or low <= self.slope <= high


def richardson_order_check(series_energies: Sequence[float], oracle_energies: Sequence[float],
                           eps_list: Sequence[float]) -> RichardsonResult:
    """Slope of log|E_series - E_oracle| against log eps; about K + 1 for a series of order K."""
    eps = np.asarray(eps_list, dtype=float)
    if eps.size < 3:
        raise ValueError("order check needs at least 3 epsilon values")
    if np.any(eps == 0.0):
        raise ValueError("epsilon = 0 cannot enter a log-log fit")
    residuals = np.abs(np.asarray(series_energies) - np.asarray(oracle_energies))
    if np.all(residuals < RESIDUAL_FLOOR):
        logger.info("Series and oracle energies indistinguishable at floating-point floor", extra={"run": "Oracle"})
        return RichardsonResult(slope=float("nan"), residuals=residuals, indistinguishable=True)
    usable = residuals >= RESIDUAL_FLOOR
    if np.sum(usable) < 2:
        return RichardsonResult(slope=float("nan"), residuals=residuals, indistinguishable=True)
    slope = float(np.polyfit(np.log(np.abs(eps[usable])), np.log(residuals[usable]), 1)[0])
    return RichardsonResult(slope=slope, residuals=residuals, indistinguishable=False)


def two_level_evolution(E_s: float, E_a: float, t) -> Tuple[np.ndarray, np.ndarray]:
    """
    Direct 2x2 evolution in the (s, a) basis from (s + a)/sqrt 2.

    Returns (amp_up, amp_down) with up = (s - a)/sqrt 2 and down = (s + a)/sqrt 2.
    """
    hamiltonian = np.diag([E_s, E_a]).astype(complex)
    initial = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    up = np.empty(times.shape, dtype=complex)
    down = np.empty(times.shape, dtype=complex)
    for i, ti in enumerate(times):
        state = expm(-1j * hamiltonian * ti) @ initial
        up[i] = (state[0] - state[1]) / math.sqrt(2.0)
        down[i] = (state[0] + state[1]) / math.sqrt(2.0)
    if np.ndim(t) == 0:
        return up[0], down[0]
    return up, down


def truncation_sensitivity(config: PhysicsConfig, N_small: int, N_large: int, levels: int = 4,
                           epsilon: Optional[float] = None) -> float:
    """Largest change of the lowest ``levels`` eigenvalues between two basis sizes."""
    small, _ = exact_spectrum(build_coupled_matrix(config, epsilon, N_small))
    large, _ = exact_spectrum(build_coupled_matrix(config, epsilon, N_large))
    return float(np.max(np.abs(small[:levels] - large[:levels])))


def spectra_for(config: PhysicsConfig, eps_values: Iterable[float]) -> Tuple[Tuple[float, float], ...]:
    return tuple(branch_energies(config, eps) for eps in eps_values)
