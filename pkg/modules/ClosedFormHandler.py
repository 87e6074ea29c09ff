"""
Ground-state corrections written as integrals over [0, 1].

These evaluate the same quantities as the series recursion along an
independent path (Gauss-Legendre quadrature of the integral representations)
and serve as its oracle.
"""
import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import exp1, expi

from modules.BasisHandler import PI_QUARTER, overlap_row0
from modules.LoggerHandler import get_logger
from modules.SeriesHandler import TruncatedSeries, series_from_fock
from modules.utils import QuadratureConvergenceError

logger = get_logger()

EULER_GAMMA = 0.5772156649015329
EIN_SERIES_LIMIT = 10.0
EIN_OVERFLOW_GUARD = 700.0
TAYLOR_CUTOFF = 1e-4
QUADRATURE_TOLERANCE = 1e-8
DEFAULT_KMAX = 40


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def gauss_legendre(cls, count: int) -> "QuadratureRule":
        if count < 2:
            raise ValueError(f"quadrature needs at least 2 nodes, got {count}")
        x, w = leggauss(count)
        return cls(nodes=0.5 * (x + 1.0), weights=0.5 * w)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def integrate(self, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Integral over [0, 1]; ``func`` maps the node array to values along the last axis."""
        return func(self.nodes) @ self.weights


def ein(y: float) -> float:
    """Entire exponential integral: integral over [0, 1] of (1 - exp(-y s))/s."""
    if not abs(y) < EIN_OVERFLOW_GUARD:
        raise ValueError(f"ein argument {y} outside overflow guard |y| < {EIN_OVERFLOW_GUARD}")
    if y == 0.0:
        return 0.0
    if abs(y) <= EIN_SERIES_LIMIT:
        total = 0.0
        power_over_factorial = 1.0
        j = 0
        while True:
            j += 1
            power_over_factorial *= y / j
            term = -((-1) ** j) * power_over_factorial / j
            total += term
            if abs(term) < 1e-17 * max(abs(total), 1e-300) and j > abs(y):
                return total
    if y > 0:
        return float(exp1(y) + math.log(y) + EULER_GAMMA)
    return float(-expi(-y) + math.log(-y) + EULER_GAMMA)


def energy_corrections_closed(b: float) -> Tuple[float, float, float]:
    """(E0, E1, E2) of the ground state; E2 = exp(-b^2/2) ein(-b^2/2) is negative."""
    if b <= 0:
        raise ValueError("b must be positive")
    return 0.5, math.exp(-b * b / 4.0), math.exp(-b * b / 2.0) * ein(-b * b / 2.0)


def _exponent(z: np.ndarray, b: float, lam):
    # G(lam) = exp(-u) with u = z b lam + b^2 lam^2 / 4
    return z * b * lam + 0.25 * b * b * lam * lam


def first_order_integrand(s, z, b: float) -> np.ndarray:
    """(1 - G(s))/s with its Taylor form below TAYLOR_CUTOFF; broadcasts s against z."""
    s = np.asarray(s, dtype=float)
    z = np.asarray(z, dtype=float)
    u = _exponent(z, b, s)
    p = z * b + 0.25 * b * b * s
    safe_s = np.where(s < TAYLOR_CUTOFF, 1.0, s)
    direct = -np.expm1(-u) / safe_s
    taylor = p - s * p ** 2 / 2.0 + s ** 2 * p ** 3 / 6.0 - s ** 3 * p ** 4 / 24.0
    return np.where(s < TAYLOR_CUTOFF, taylor, direct)


def second_order_integrand(s1, s2, z, b: float) -> np.ndarray:
    """
    The order-two bracket divided by s1 s2, rewritten as

        -expm1(-u(s1 s2)) + G(s2) expm1(d) + expm1(b^2 s1/2) expm1(-u((1-s1) s2))

    where d = u(s2) - u((1-s1) s2). Each term vanishes like s1 s2.
    """
    u_inner = _exponent(z, b, s1 * s2)
    u_outer = _exponent(z, b, s2)
    u_mixed = _exponent(z, b, (1.0 - s1) * s2)
    d = z * b * s1 * s2 + 0.25 * b * b * s2 * s2 * s1 * (2.0 - s1)
    numerator = (
        -np.expm1(-u_inner)
        + np.exp(-u_outer) * np.expm1(d)
        + np.expm1(0.5 * b * b * s1) * np.expm1(-u_mixed)
    )
    return numerator / (s1 * s2)


def _zplus_quadrature(order: int, b: float, z: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    envelope = PI_QUARTER * np.exp(-0.5 * z * z)
    zc = z[:, None]
    if order == 1:
        values = first_order_integrand(rule.nodes[None, :], zc, b) @ rule.weights
        return envelope * math.exp(-b * b / 4.0) * values
    s1 = rule.nodes[:, None]
    s2 = rule.nodes[None, :]
    values = np.empty_like(z)
    for i, zi in enumerate(z):
        grid = second_order_integrand(s1, s2, zi, b)
        values[i] = rule.weights @ grid @ rule.weights
    return envelope * math.exp(-b * b / 2.0) * values


def zplus_correction(order: int, b: float, z_samples, quad_nodes: int = 64) -> np.ndarray:
    """
    Z+^(order)(z) of the ground state (order 1 or 2) by Gauss-Legendre quadrature.

    Order 2 uses a tensor grid. The result is recomputed with twice the nodes and
    no sample may move by more than QUADRATURE_TOLERANCE.
    """
    if order not in (1, 2):
        raise ValueError(f"closed forms exist for orders 1 and 2, got {order}")
    z = np.asarray(z_samples, dtype=float).ravel()
    values = _zplus_quadrature(order, b, z, QuadratureRule.gauss_legendre(quad_nodes))
    refined = _zplus_quadrature(order, b, z, QuadratureRule.gauss_legendre(2 * quad_nodes))
    shift = float(np.max(np.abs(values - refined)))
    if not np.isfinite(shift) or shift > QUADRATURE_TOLERANCE:
        raise QuadratureConvergenceError(
            f"order-{order} closed form did not converge with {quad_nodes} nodes: max shift {shift:.3e}"
        )
    logger.debug(f"Closed-form Z+^({order}) on {z.size} samples, node-doubling shift {shift:.2e}",
                 extra={"run": "ClosedForm"})
    return refined.reshape(np.shape(z_samples))


def first_order_fock_amplitudes(b: float, k_max: int = DEFAULT_KMAX) -> np.ndarray:
    """
    Textbook first-order amplitudes <k|V|0>/(E_0 - E_k) = -overlap_row0(k)/k, k = 0..k_max.

    The k = 0 amplitude is zero.
    """
    amplitudes = np.zeros(k_max + 1)
    for k in range(1, k_max + 1):
        amplitudes[k] = -overlap_row0(k, b) / k
    return amplitudes


def appendix_first_order(b: float, k_max: int = DEFAULT_KMAX) -> TruncatedSeries:
    """First-order correction from the sum over intermediate states, as an x-series of degree k_max."""
    if k_max < 1:
        raise ValueError(f"k_max must be at least 1, got {k_max}")
    series = series_from_fock(first_order_fock_amplitudes(b, k_max))
    tail = abs(overlap_row0(k_max + 1, b)) / (k_max + 1)
    logger.debug(f"Intermediate-state sum truncated at k={k_max}; next amplitude {tail:.2e}",
                 extra={"run": "ClosedForm"})
    return series
