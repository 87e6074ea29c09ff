"""
Harmonic-oscillator basis in natural units.

psi_n(z) = N_n H_n(z) exp(-z^2/2) with N_n = (2^n n! sqrt(pi))^(-1/2). A state
of angular mode ell is centred at z = -ell*b.
"""
import math
import threading
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from numpy.polynomial.hermite import hermgauss

from modules.LoggerHandler import get_logger
from modules.utils import QuadratureConvergenceError

logger = get_logger()

PI_QUARTER = math.pi ** -0.25
OVERLAP_TOLERANCE = 1e-10
EXTRA_NODES = 8


class HermiteEvaluator:
    """
    Hermite polynomials and normalized oscillator eigenfunctions up to ``max_order``.

    Eigenfunctions come from the recurrence on N_n H_n exp(-z^2/2) carried jointly,
    so nothing overflows for high orders. Gauss-Hermite rules are cached per
    node count; the cache is shared between threads.
    """

    def __init__(self, max_order: int = 256):
        self.max_order = max_order
        self._rules: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
        self._lock = threading.Lock()

    def _check_order(self, n: int):
        if n < 0:
            raise ValueError(f"order must be non-negative, got {n}")
        if n > self.max_order:
            raise ValueError(f"order {n} exceeds max_order {self.max_order}")

    def hermite(self, n: int, z) -> np.ndarray:
        """Physicists' H_n(z) from H_{n+1} = 2z H_n - 2n H_{n-1}."""
        self._check_order(n)
        z = np.asarray(z, dtype=float)
        previous = np.zeros_like(z)
        current = np.ones_like(z)
        for j in range(n):
            previous, current = current, 2.0 * z * current - 2.0 * j * previous
        return current

    def table(self, n_max: int, z, weighted: bool = True) -> np.ndarray:
        """
        Rows 0..n_max of normalized Hermite functions at ``z``.

        With ``weighted=False`` the Gaussian factor is left out, giving N_n H_n(z).
        """
        self._check_order(n_max)
        z = np.asarray(z, dtype=float)
        rows = np.empty((n_max + 1,) + z.shape)
        rows[0] = PI_QUARTER * (np.exp(-0.5 * z * z) if weighted else np.ones_like(z))
        if n_max >= 1:
            rows[1] = math.sqrt(2.0) * z * rows[0]
        for n in range(1, n_max):
            rows[n + 1] = math.sqrt(2.0 / (n + 1)) * z * rows[n] - math.sqrt(n / (n + 1)) * rows[n - 1]
        return rows

    def gauss_hermite(self, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
        with self._lock:
            rule = self._rules.get(nodes)
            if rule is None:
                rule = hermgauss(nodes)
                self._rules[nodes] = rule
        return rule


_default_evaluator = HermiteEvaluator()


def get_evaluator() -> HermiteEvaluator:
    return _default_evaluator


def eigenfunction(n: int, center: float, z) -> np.ndarray:
    """Normalized eigenfunction of level n centred at ``center`` (``-ell*b`` for mode ell)."""
    z = np.asarray(z, dtype=float)
    return _default_evaluator.table(n, z - center)[n]


def overlap_row0(k: int, b: float) -> float:
    """<centred ground state | level k centred at -b> = (-b/sqrt 2)^k exp(-b^2/4) / sqrt(k!)."""
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    if k == 0:
        return math.exp(-b * b / 4.0)
    c = -b / math.sqrt(2.0)
    if c == 0.0:
        return 0.0
    magnitude = math.exp(k * math.log(abs(c)) - b * b / 4.0 - 0.5 * math.lgamma(k + 1))
    return math.copysign(magnitude, c) if k % 2 else magnitude


@dataclass(frozen=True)
class OverlapMatrix:
    """
    T[n][m] = integral of psi_n(z + b) psi_m(z) dz.

    Rows index the level centred at -b, columns the level centred at 0, so
    row 0 is ``overlap_row0``.
    """

    entries: np.ndarray
    displacement: float

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def row0(self) -> np.ndarray:
        return self.entries[0].copy()


def _overlaps_by_quadrature(N: int, b: float, nodes: int, evaluator: HermiteEvaluator) -> np.ndarray:
    # z = w - b/2 turns the product Gaussian into exp(-w^2 - b^2/4)
    w, weights = evaluator.gauss_hermite(nodes)
    shifted_left = evaluator.table(N - 1, w + b / 2.0, weighted=False)
    shifted_right = evaluator.table(N - 1, w - b / 2.0, weighted=False)
    return math.exp(-b * b / 4.0) * (shifted_left * weights) @ shifted_right.T


def build_overlap_matrix(N: int, b: float, evaluator: HermiteEvaluator = None) -> OverlapMatrix:
    """
    Displaced overlaps by Gauss-Hermite quadrature.

    The integrand is a polynomial of degree at most 2N-2 against exp(-w^2), so N
    nodes are already exact; the result is recomputed with extra nodes and the
    two must agree to OVERLAP_TOLERANCE.
    """
    if N < 1:
        raise ValueError(f"N must be at least 1, got {N}")
    evaluator = evaluator or _default_evaluator
    nodes = N + EXTRA_NODES
    entries = _overlaps_by_quadrature(N, b, nodes, evaluator)
    refined = _overlaps_by_quadrature(N, b, nodes + EXTRA_NODES, evaluator)
    deviation = float(np.max(np.abs(entries - refined)))
    if not np.isfinite(deviation) or deviation > OVERLAP_TOLERANCE:
        raise QuadratureConvergenceError(
            f"overlap quadrature did not converge for N={N}, b={b}: deviation {deviation:.3e}"
        )
    logger.debug(f"Built {N}x{N} overlap matrix for b={b} (quadrature deviation {deviation:.2e})",
                 extra={"run": "Basis"})
    entries.setflags(write=False)
    return OverlapMatrix(entries=entries, displacement=b)
