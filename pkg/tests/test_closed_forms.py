import math

import numpy as np
import pytest
from scipy.integrate import quad

from modules.BasisHandler import overlap_row0
from modules.ClosedFormHandler import (
    TAYLOR_CUTOFF,
    QuadratureRule,
    appendix_first_order,
    ein,
    energy_corrections_closed,
    first_order_integrand,
    second_order_integrand,
    zplus_correction,
)
from modules.ConfigurationHandler import PhysicsConfig
from modules.SeriesHandler import fock_amplitudes, order_component, solve_perturbation
from modules.spinor import Branch
from modules.utils import QuadratureConvergenceError


@pytest.fixture(scope="module")
def ground():
    return solve_perturbation(0, 2, Branch.SYMMETRIC, PhysicsConfig(b=2.0))


def test_quadrature_rule_on_unit_interval() -> None:
    rule = QuadratureRule.gauss_legendre(8)
    assert rule.size == 8
    assert rule.integrate(lambda s: s ** 2) == pytest.approx(1.0 / 3.0, abs=1e-15)
    with pytest.raises(ValueError):
        QuadratureRule.gauss_legendre(1)


def test_ein_known_value() -> None:
    assert ein(0.0) == 0.0
    assert ein(1.0) == pytest.approx(0.7965995992970531, rel=1e-14)


@pytest.mark.parametrize("y", [-15.0, -10.0, -2.0, 0.5, 3.0, 10.0, 25.0])
def test_ein_matches_its_integral(y) -> None:
    expected, _ = quad(lambda s: -math.expm1(-y * s) / s if s > 0 else y, 0.0, 1.0, epsabs=0.0, epsrel=1e-13)
    assert ein(y) == pytest.approx(expected, rel=1e-11)


def test_ein_overflow_guard() -> None:
    with pytest.raises(ValueError):
        ein(-800.0)


def test_closed_energy_corrections() -> None:
    e0, e1, e2 = energy_corrections_closed(2.0)
    assert e0 == 0.5
    assert e1 == pytest.approx(math.exp(-1.0))
    assert e2 == pytest.approx(math.exp(-2.0) * ein(-2.0))
    assert e2 < 0.0
    with pytest.raises(ValueError):
        energy_corrections_closed(0.0)


def test_first_order_integrand_is_continuous_at_cutoff() -> None:
    z = np.array([-2.0, 0.0, 1.5])
    below = first_order_integrand(TAYLOR_CUTOFF * (1.0 - 1e-9), z, 2.0)
    above = first_order_integrand(TAYLOR_CUTOFF * (1.0 + 1e-9), z, 2.0)
    assert np.allclose(below, above, rtol=1e-9, atol=1e-12)


def test_first_order_integrand_limit_at_zero() -> None:
    # (1 - G(s))/s -> z b as s -> 0
    assert first_order_integrand(0.0, 0.7, 2.0) == pytest.approx(1.4)


def test_second_order_integrand_is_finite_near_corner() -> None:
    s = np.array([1e-8, 1e-4, 0.5, 1.0 - 1e-8])
    values = second_order_integrand(s[:, None], s[None, :], 0.3, 2.0)
    assert np.all(np.isfinite(values))


def test_first_order_closed_form_matches_series(ground) -> None:
    z = np.linspace(-5.0, 5.0, 41)
    assert np.allclose(zplus_correction(1, 2.0, z), order_component(ground, 1, z), atol=1e-10)


def test_second_order_closed_form_matches_series(ground) -> None:
    z = np.linspace(-5.0, 5.0, 21)
    assert np.allclose(zplus_correction(2, 2.0, z), order_component(ground, 2, z), atol=1e-8)


@pytest.mark.parametrize("order", [1, 2])
def test_closed_form_keeps_sample_shape(order) -> None:
    z = np.linspace(-1.0, 1.0, 6).reshape(2, 3)
    grid = zplus_correction(order, 2.0, z)
    assert grid.shape == (2, 3)
    assert np.allclose(grid.ravel(), zplus_correction(order, 2.0, z.ravel()), atol=1e-14)
    assert np.ndim(zplus_correction(order, 2.0, 0.5)) == 0


def test_closed_forms_only_for_first_two_orders() -> None:
    with pytest.raises(ValueError):
        zplus_correction(3, 2.0, [0.0])


def test_coarse_quadrature_is_rejected() -> None:
    with pytest.raises(QuadratureConvergenceError):
        zplus_correction(1, 2.0, np.linspace(-3.0, 3.0, 7), quad_nodes=2)


def test_intermediate_state_sum() -> None:
    amplitudes = fock_amplitudes(appendix_first_order(2.0, 40))
    assert amplitudes[0] == 0.0
    for k in (1, 2, 5, 40):
        assert amplitudes[k] == pytest.approx(-overlap_row0(k, 2.0) / k, rel=1e-12)
    with pytest.raises(ValueError):
        appendix_first_order(2.0, 0)
