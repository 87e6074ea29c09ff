"""
Order-by-order perturbation engine for the spin-coupled oscillator.

A state f(a+)|0> is stored as the coefficients of the polynomial f(x), x
standing for the raising operator. The coupling maps f(x) to
exp(-b^2/4) exp(-c x) f(-x - c) with c = b/sqrt(2).
"""
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.special import comb, gammaln

from modules.BasisHandler import get_evaluator
from modules.ConfigurationHandler import PhysicsConfig
from modules.LoggerHandler import get_logger
from modules.spinor import Branch, SpinorProfile
from modules.utils import CrossCheckError, SeriesTruncationError

logger = get_logger()

CROSS_CHECK_TOLERANCE = 1e-10
TAIL_TOLERANCE = 1e-12
TAIL_WIDTH = 4


@dataclass(frozen=True)
class TruncatedSeries:
    """Coefficients of x^0..x^D; every operation truncates back to degree D."""

    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def zero(cls, degree: int) -> "TruncatedSeries":
        return cls(np.zeros(degree + 1))

    @classmethod
    def monomial(cls, n: int, degree: int, value: float = 1.0) -> "TruncatedSeries":
        coeffs = np.zeros(degree + 1)
        coeffs[n] = value
        return cls(coeffs)

    def __call__(self, x):
        return P.polyval(x, self.coeffs)

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        return series_add(self, other)

    def __mul__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        return series_multiply(self, other)


def _check_degrees(a: TruncatedSeries, b: TruncatedSeries):
    if a.degree != b.degree:
        raise ValueError(f"degree mismatch: {a.degree} vs {b.degree}")


def series_add(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    _check_degrees(a, b)
    return TruncatedSeries(a.coeffs + b.coeffs)


def series_scale(a: TruncatedSeries, factor: float) -> TruncatedSeries:
    return TruncatedSeries(factor * a.coeffs)


def series_multiply(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    _check_degrees(a, b)
    return TruncatedSeries(np.convolve(a.coeffs, b.coeffs)[: a.degree + 1])


def series_exp_linear(lam: float, D: int) -> TruncatedSeries:
    """Series of exp(lam x): lam^k / k!."""
    if D < 1:
        raise ValueError(f"D must be at least 1, got {D}")
    coeffs = np.ones(D + 1)
    for k in range(1, D + 1):
        coeffs[k] = coeffs[k - 1] * lam / k
    return TruncatedSeries(coeffs)


def _reflect_shift_matrix(D: int, c: float) -> np.ndarray:
    # g_j = sum_m a_m (-1)^m C(m, j) c^(m-j)
    j = np.arange(D + 1)[:, None]
    m = np.arange(D + 1)[None, :]
    power = np.where(m >= j, m - j, 0)
    matrix = comb(m, j) * np.power(-1.0, m) * np.power(c, power)
    return np.where(m >= j, matrix, 0.0)


def series_reflect_shift(f: TruncatedSeries, c: float) -> TruncatedSeries:
    """Binomial re-expansion of f(-x - c)."""
    return TruncatedSeries(_reflect_shift_matrix(f.degree, c) @ f.coeffs)


def fock_amplitudes(series: TruncatedSeries) -> np.ndarray:
    """Amplitudes on |m>: coefficient of x^m times sqrt(m!)."""
    m = np.arange(series.degree + 1)
    return series.coeffs * np.exp(0.5 * gammaln(m + 1))


def series_from_fock(amplitudes: np.ndarray) -> TruncatedSeries:
    m = np.arange(len(amplitudes))
    return TruncatedSeries(np.asarray(amplitudes, dtype=float) * np.exp(-0.5 * gammaln(m + 1)))


def fock_norm(series: TruncatedSeries) -> float:
    return float(np.linalg.norm(fock_amplitudes(series)))


@dataclass(frozen=True)
class PerturbationSolution:
    """
    Energies E[k] and series f[k] of level n for k = 0..order.

    Both are stored for the symmetric branch and are independent of epsilon;
    the antisymmetric branch reads them with epsilon -> -epsilon.
    """

    n: int
    b: float
    energies: Tuple[float, ...]
    series: Tuple[TruncatedSeries, ...]
    branch: Branch = Branch.SYMMETRIC

    @property
    def order(self) -> int:
        return len(self.energies) - 1

    @property
    def degree(self) -> int:
        return self.series[0].degree

    def extended(self, energy: float, series: TruncatedSeries) -> "PerturbationSolution":
        return PerturbationSolution(self.n, self.b, self.energies + (energy,), self.series + (series,), self.branch)

    def with_branch(self, branch: Branch) -> "PerturbationSolution":
        return PerturbationSolution(self.n, self.b, self.energies, self.series, Branch(branch))

    def order_weights(self, epsilon: float) -> np.ndarray:
        """epsilon^k for the symmetric branch, (-epsilon)^k for the antisymmetric one."""
        return (self.branch.sign * epsilon) ** np.arange(self.order + 1)

    def energy(self, epsilon: float) -> float:
        return float(np.dot(self.order_weights(epsilon), self.energies))


def unperturbed_solution(n: int, b: float, D: int) -> PerturbationSolution:
    if n > D:
        raise ValueError(f"series degree {D} cannot hold level {n}")
    f0 = TruncatedSeries.monomial(n, D, math.exp(-0.5 * math.lgamma(n + 1)))
    return PerturbationSolution(n=n, b=b, energies=(n + 0.5,), series=(f0,))


def closed_energy_sum(n: int, previous: TruncatedSeries, b: float) -> float:
    """
    E_n^(k) from f_n^(k-1) alone:
    exp(-b^2/4)/sqrt(n!) * sum_r C(n, r) (-c)^(n-r) (-1)^r f^(r)(-c).
    """
    c = b / math.sqrt(2.0)
    total = 0.0
    for r in range(n + 1):
        derivative = P.polyval(-c, P.polyder(previous.coeffs, r)) if r <= previous.degree else 0.0
        total += comb(n, r) * (-c) ** (n - r) * (-1) ** r * derivative
    return math.exp(-b * b / 4.0 - 0.5 * math.lgamma(n + 1)) * total


def recursion_step(n: int, k: int, prior: PerturbationSolution, b: float) -> Tuple[float, TruncatedSeries]:
    """
    Solve order k of level n from orders 0..k-1.

    The right-hand side S(x) collects the coupling of f^(k-1) and the lower
    energy corrections; E^(k) removes its x^n component and x f' - n f = RHS
    is solved coefficientwise. E^(k) is recomputed from the closed sum and the
    two must agree.
    """
    if k < 1:
        raise ValueError("recursion_step needs k >= 1")
    if prior.order < k - 1:
        raise ValueError(f"prior holds orders up to {prior.order}, order {k - 1} needed")
    D = prior.degree
    c = b / math.sqrt(2.0)

    coupling = series_multiply(series_exp_linear(-c, D), series_reflect_shift(prior.series[k - 1], c))
    rhs = series_scale(coupling, -math.exp(-b * b / 4.0)).coeffs.copy()
    for m in range(1, k):
        rhs += prior.energies[k - m] * prior.series[m].coeffs

    energy = -math.exp(0.5 * math.lgamma(n + 1)) * rhs[n]
    closed = closed_energy_sum(n, prior.series[k - 1], b)
    if abs(energy - closed) > CROSS_CHECK_TOLERANCE * max(1.0, abs(energy)):
        raise CrossCheckError(
            f"E_{n}^({k}) mismatch: coefficient extraction {energy:.15g} vs closed sum {closed:.15g}; "
            f"series_degree {D} is probably too low"
        )

    rhs[n] += energy * math.exp(-0.5 * math.lgamma(n + 1))
    m = np.arange(D + 1)
    denominators = np.where(m == n, 1.0, m - n)
    coeffs = rhs / denominators
    coeffs[n] = 0.0
    logger.debug(f"Level {n} order {k}: E = {energy:.15g}", extra={"run": "Series"})
    return energy, TruncatedSeries(coeffs)


def _check_tail(solution: PerturbationSolution):
    for k, series in enumerate(solution.series):
        tail = np.abs(fock_amplitudes(series)[-TAIL_WIDTH:])
        if np.max(tail) >= TAIL_TOLERANCE:
            raise SeriesTruncationError(
                f"level {solution.n} order {k}: top Fock amplitudes reach {np.max(tail):.3e} "
                f"at series_degree {series.degree}"
            )


def solve_perturbation(n: int, K: int, branch, config: PhysicsConfig) -> PerturbationSolution:
    """Orders 0..K of level n by repeated ``recursion_step``, followed by the truncation tail check."""
    solution = unperturbed_solution(n, config.b, config.series_degree)
    for k in range(1, K + 1):
        energy, series = recursion_step(n, k, solution, config.b)
        solution = solution.extended(energy, series)
    _check_tail(solution)
    logger.info(f"Solved level {n} to order {K} (b={config.b}, D={config.series_degree})", extra={"run": "Series"})
    return solution.with_branch(branch)


def solve_levels(ns: Iterable[int], K: int, config: PhysicsConfig, branch=Branch.SYMMETRIC) -> Dict[int, PerturbationSolution]:
    return {n: solve_perturbation(n, K, branch, config) for n in ns}


def order_terms(solution: PerturbationSolution, epsilon: float) -> np.ndarray:
    """|epsilon|^k times the Fock norm of f[k]."""
    norms = np.array([fock_norm(series) for series in solution.series])
    return abs(epsilon) ** np.arange(solution.order + 1) * norms


def convergence_ratio(solution: PerturbationSolution, epsilon: float) -> float:
    """Largest ratio of successive order terms; below 1 means the epsilon series is still shrinking."""
    terms = order_terms(solution, epsilon)
    if len(terms) < 2 or terms[0] == 0.0:
        return float("nan")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = terms[1:] / terms[:-1]
    return float(np.nanmax(ratios)) if np.any(np.isfinite(ratios)) else float("nan")


def _evaluate_series(series: TruncatedSeries, z: np.ndarray) -> np.ndarray:
    table = get_evaluator().table(series.degree, z)
    return fock_amplitudes(series) @ table


def order_component(solution: PerturbationSolution, k: int, z) -> np.ndarray:
    """Z+^(k)(z) = sum_m f[k]_m sqrt(m!) psi_m(z), unnormalized and without epsilon."""
    z = np.asarray(z, dtype=float)
    return _evaluate_series(solution.series[k], z.ravel()).reshape(z.shape)


def _zplus(solution: PerturbationSolution, epsilon: float, z: np.ndarray) -> np.ndarray:
    # symmetric: sum eps^k Z^(k); antisymmetric: -sum (-eps)^k Z^(k)
    weights = solution.order_weights(epsilon)
    combined = TruncatedSeries(sum(w * s.coeffs for w, s in zip(weights, solution.series)))
    return solution.branch.sign * _evaluate_series(combined, z)


def synthesize_wavefunction(
    solution: PerturbationSolution,
    epsilon: float,
    z_samples,
    ell: int = 0,
) -> SpinorProfile:
    """
    Sample the spinor of ``solution`` at ``z_samples``, normalized on that grid.

    Z-(z) = +-Z+(-z-b) by branch; mode ell is the ell = 0 profile translated
    by z -> z + ell*b.
    """
    z = np.asarray(z_samples, dtype=float)
    b = solution.b
    shifted = z + ell * b
    terms = order_terms(solution, epsilon)
    if solution.order >= 1 and np.any(np.diff(terms) > 0):
        logger.warning(
            f"Epsilon series terms do not decrease for eps={epsilon}, b={b}: {np.array2string(terms, precision=3)}",
            extra={"run": "Series"},
        )
    zplus = _zplus(solution, epsilon, shifted)
    zminus = solution.branch.sign * _zplus(solution, epsilon, -shifted - b)
    profile = SpinorProfile(
        z_samples=z,
        zplus=zplus,
        zminus=zminus,
        ell=ell,
        energy=solution.energy(epsilon),
        branch=solution.branch,
        b=b,
        epsilon=epsilon,
    )
    return profile.normalized()
