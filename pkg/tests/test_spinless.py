import math

import numpy as np
import pytest

from modules.OracleHandler import eigenbasis_evolution
from modules.SpinlessHandler import (
    AngularProfile,
    centroid,
    classical_position,
    classical_trajectory,
    coherent_evolution,
    energy,
    extract_modes,
    fourier_transform_protocol,
    omitted_phase,
    readout_position,
    readout_window,
)
from modules.utils import ConfigurationError, PeakOverlapError

STAIRCASE_EXPECTED = {-3: 1.0 / 1.5, -2: 1.0, -1: 1.0 / 1.5, 0: 1.0 / 1.5}


def _grid(profile: AngularProfile, b: float, n_phi: int = 32, n_z: int = 1201):
    z_min, z_max = readout_window(profile, b)
    return np.linspace(0.0, 2.0 * math.pi, n_phi, endpoint=False), np.linspace(z_min, z_max, n_z)


def test_spectrum_is_independent_of_mode() -> None:
    assert energy(0) == 0.5
    assert energy(3, ell=-7) == energy(3, ell=2) == 3.5
    with pytest.raises(ValueError):
        energy(-1)


def test_coherent_state_starts_at_origin() -> None:
    z = np.linspace(-5.0, 5.0, 11)
    values = coherent_evolution(2, 1.5, 0.0, 0.3, z)
    expected = math.pi ** -0.25 * np.exp(-0.5 * z ** 2) * np.exp(0.6j) / math.sqrt(2.0 * math.pi)
    assert np.allclose(values, expected)


@pytest.mark.parametrize("ell, b, t", [(1, 2.0, 1.3), (-2, 1.5, 2.9), (3, 1.0, 5.0)])
def test_coherent_state_matches_eigenbasis_sum(ell, b, t) -> None:
    z = np.linspace(-12.0, 12.0, 97)
    closed = coherent_evolution(ell, b, t, 0.4, z) * omitted_phase(ell, b, t)
    resummed = eigenbasis_evolution(ell, b, t, z, phi=0.4, N=80)
    assert np.allclose(closed, resummed, atol=1e-10)


def test_omitted_phase_vanishes_at_half_periods() -> None:
    for t in (0.0, 0.5 * math.pi, math.pi):
        assert omitted_phase(3, 2.0, t) == pytest.approx(1.0)


def test_mode_returns_after_full_period() -> None:
    z = np.linspace(-8.0, 8.0, 33)
    start = coherent_evolution(1, 2.0, 0.0, 0.0, z)
    later = coherent_evolution(1, 2.0, 2.0 * math.pi, 0.0, z)
    assert np.allclose(later, -start)


def test_centroid_follows_classical_orbit() -> None:
    profile = AngularProfile({-1: 1.0})
    phi, z = _grid(profile, 3.0)
    for t in (0.0, 0.7, math.pi / 2.0, math.pi):
        field = fourier_transform_protocol(profile, 3.0, t, phi, z)
        assert centroid(field) == pytest.approx(float(classical_position(0.0, -3.0, t)), abs=1e-8)
        assert field.norm() == pytest.approx(1.0, abs=1e-10)


def test_superposition_norm_is_mode_weight() -> None:
    profile = AngularProfile.named("staircase")
    phi, z = _grid(profile, 8.0)
    field = fourier_transform_protocol(profile, 8.0, 1.1, phi, z)
    assert field.norm() == pytest.approx(profile.weight(), rel=1e-9)


def test_superposition_is_linear_in_profile() -> None:
    profile = AngularProfile.named("staircase")
    factor = 0.4 - 1.2j
    phi, z = _grid(profile, 8.0, n_z=401)
    base = fourier_transform_protocol(profile, 8.0, 1.1, phi, z)
    scaled = fourier_transform_protocol(profile.scaled(factor), 8.0, 1.1, phi, z)
    assert np.allclose(scaled.samples, factor * base.samples, atol=1e-14)
    assert profile.scaled(factor).weight() == pytest.approx(abs(factor) ** 2 * profile.weight())
    # relative read-out ignores the overall factor
    at_pi = fourier_transform_protocol(profile.scaled(factor), 8.0, math.pi, phi, z)
    measured = extract_modes(at_pi, 8.0, profile.modes)
    for ell, expected in STAIRCASE_EXPECTED.items():
        assert measured[ell] == pytest.approx(expected, abs=1e-9)


def test_fourier_read_out_recovers_staircase() -> None:
    profile = AngularProfile.named("staircase")
    phi, z = _grid(profile, 8.0)
    field = fourier_transform_protocol(profile, 8.0, math.pi, phi, z)
    measured = extract_modes(field, 8.0, profile.modes)
    for ell, expected in STAIRCASE_EXPECTED.items():
        assert measured[ell] == pytest.approx(expected, abs=1e-9)


def test_read_out_relative_to_chosen_mode() -> None:
    profile = AngularProfile({0: 2.0, 1: 1.0})
    phi, z = _grid(profile, 6.0)
    field = fourier_transform_protocol(profile, 6.0, math.pi, phi, z)
    measured = extract_modes(field, 6.0, [0, 1], reference=0)
    assert measured[0] == pytest.approx(1.0)
    assert measured[1] == pytest.approx(0.5, abs=1e-9)


def test_overlapping_peaks_are_rejected(lab_logs) -> None:
    profile = AngularProfile.named("staircase")
    phi, z = _grid(profile, 2.0)
    field = fourier_transform_protocol(profile, 2.0, math.pi, phi, z)
    assert any("overlap" in record.getMessage() for record in lab_logs.records)
    with pytest.raises(PeakOverlapError):
        extract_modes(field, 2.0, profile.modes)


def test_read_out_point_outside_grid() -> None:
    profile = AngularProfile({0: 1.0, -2: 1.0})
    phi = np.linspace(0.0, 2.0 * math.pi, 16, endpoint=False)
    field = fourier_transform_protocol(profile, 8.0, math.pi, phi, np.linspace(-6.0, 6.0, 121))
    with pytest.raises(ConfigurationError, match="read-out point"):
        extract_modes(field, 8.0, profile.modes)


def test_named_profiles() -> None:
    assert AngularProfile.named("cos").modes == {-1: 0.5, 1: 0.5}
    parsed = AngularProfile.named("modes:0=1, -2=1.5")
    assert parsed.modes == {-2: 1.5, 0: 1.0}
    assert parsed.max_mode == 2
    with pytest.raises(ConfigurationError):
        AngularProfile.named("triangle")
    with pytest.raises(ConfigurationError):
        AngularProfile.named("modes:x=1")


def test_profile_from_samples() -> None:
    phi = np.linspace(0.0, 2.0 * math.pi, 16, endpoint=False)
    recovered = AngularProfile.from_samples(np.sin(phi) + 0.25)
    assert set(recovered.modes) == {-1, 0, 1}
    assert recovered.modes[1] == pytest.approx(-0.5j)
    assert np.allclose(recovered(phi), np.sin(phi) + 0.25)


def test_readout_positions() -> None:
    assert readout_position(-3, 8.0) == pytest.approx(48.0)
    assert readout_position(2, 8.0, t=0.0) == 0.0
    assert readout_window(AngularProfile.named("staircase"), 8.0) == (-6.0, 54.0)


def test_classical_speed_is_conserved() -> None:
    t = np.linspace(0.0, 10.0, 50)
    v_z, v_phi = classical_trajectory(0.3, -1.2, t)
    assert np.allclose(v_z ** 2 + v_phi ** 2, 0.3 ** 2 + 1.2 ** 2)
    assert np.allclose(classical_position(0.0, 2.0, [0.0, math.pi]), [0.0, -4.0])
