import math

import numpy as np
import pytest
from scipy.linalg import expm

from modules.ConfigurationHandler import PhysicsConfig
from modules.OracleHandler import two_level_evolution
from modules.SeriesHandler import solve_perturbation, synthesize_wavefunction
from modules.SpinHandler import (
    TwoStateSystem,
    assemble_cylinder_spinor,
    branch_solutions,
    density_peaks,
    eigen_energies,
    peak_separation,
    rabi_evolution,
    rabi_spinor,
    sign_changes,
    spin_field,
)
from modules.spinor import Branch, SpinorProfile

Z = np.linspace(-13.0, 11.0, 1201)


def _profile(eps: float, branch: Branch = Branch.SYMMETRIC, b: float = 2.0) -> SpinorProfile:
    solution = solve_perturbation(0, 2, branch, PhysicsConfig(b=b))
    return synthesize_wavefunction(solution, eps, Z)


def test_spin_angles_of_uncoupled_state() -> None:
    field = spin_field(_profile(0.0))
    middle = np.argmin(np.abs(Z + 1.0))
    assert field.alpha[middle] == pytest.approx(0.5 * math.pi, abs=1e-9)
    assert np.all((field.alpha >= 0.0) & (field.alpha <= math.pi))
    assert not np.any(field.interpolated)


def test_spin_points_up_on_upper_well_for_wide_spacing() -> None:
    field = spin_field(_profile(0.0, b=4.0))
    origin = np.argmin(np.abs(Z))
    assert field.alpha[origin] < 1e-3
    assert field.alpha[np.argmin(np.abs(Z + 4.0))] > math.pi - 1e-3


def test_spin_direction_is_unit_and_radial_in_plane() -> None:
    field = spin_field(_profile(0.5), phi=0.7)
    direction = field.direction()
    assert direction.shape == (Z.size, 3)
    assert np.allclose(np.linalg.norm(direction, axis=1), 1.0)
    # real components: beta is phi or phi + pi, so the spin has no azimuthal part
    assert np.allclose(np.abs(field.radial_component()), np.sin(field.alpha))


def test_density_is_conserved_under_branch_flip_at_zero_coupling() -> None:
    symmetric = _profile(0.0)
    antisymmetric = _profile(0.0, Branch.ANTISYMMETRIC)
    assert np.allclose(symmetric.density(), antisymmetric.density())


def test_vanishing_spinor_is_interpolated(lab_logs) -> None:
    z = np.linspace(-2.0, 2.0, 5)
    zplus = np.array([1.0, 0.5, 0.0, 0.0, 0.0])
    zminus = np.array([0.0, 0.5, 0.0, 0.5, 1.0])
    profile = SpinorProfile(z, zplus, zminus, 0, 0.5, Branch.SYMMETRIC, 2.0, 0.0)
    field = spin_field(profile)
    assert list(field.interpolated) == [False, False, True, False, False]
    assert field.alpha[2] == pytest.approx(0.75 * math.pi)
    assert any("interpolated" in record.getMessage() for record in lab_logs.records)


def test_coupling_pushes_symmetric_maxima_apart() -> None:
    uncoupled = density_peaks(_profile(0.0))
    coupled = density_peaks(_profile(0.5))
    assert uncoupled.size == coupled.size == 2
    assert uncoupled[0] == pytest.approx(-2.0, abs=0.15)
    assert uncoupled[1] == pytest.approx(0.0, abs=0.15)
    assert coupled[1] - coupled[0] > uncoupled[1] - uncoupled[0] + 0.1
    assert peak_separation(_profile(0.0)) == pytest.approx(uncoupled[1] - uncoupled[0])


def test_merged_maxima_have_zero_separation() -> None:
    z = np.linspace(-4.0, 4.0, 401)
    bump = np.exp(-0.5 * (z + 0.3) ** 2)
    profile = SpinorProfile(z, 0.6 * bump, 0.8 * bump, 0, 0.5, Branch.ANTISYMMETRIC, 2.0, 0.5)
    peaks = density_peaks(profile)
    assert peaks.size == 1
    assert peaks[0] == pytest.approx(-0.3, abs=1e-3)
    assert peak_separation(profile) == 0.0


def test_symmetric_upper_component_changes_sign_between_wells() -> None:
    profile = _profile(0.5)
    zeros = sign_changes(profile.zplus, Z, threshold=1e-6)
    assert np.any((zeros > -2.0) & (zeros < -1.2))


def test_sign_changes_interpolates() -> None:
    z = np.linspace(0.0, 3.0, 31)
    zeros = sign_changes(np.cos(z), z)
    assert zeros == pytest.approx([0.5 * math.pi], abs=1e-3)


def test_branch_energies_from_series() -> None:
    config = PhysicsConfig(b=2.0, epsilon=0.4)
    symmetric, antisymmetric = branch_solutions(config)
    assert symmetric.branch is Branch.SYMMETRIC and antisymmetric.branch is Branch.ANTISYMMETRIC
    E_s, E_a = eigen_energies(config)
    e = symmetric.energies
    assert E_s == pytest.approx(e[0] + 0.4 * e[1] + 0.16 * e[2])
    assert E_a == pytest.approx(e[0] - 0.4 * e[1] + 0.16 * e[2])


def test_two_state_rates() -> None:
    system = TwoStateSystem(E_s=0.9, E_a=0.5)
    assert system.omega == pytest.approx(0.2)
    assert system.mean_energy == pytest.approx(0.7)
    assert system.period() == pytest.approx(math.pi / 0.2)
    assert TwoStateSystem(E_s=0.5, E_a=0.5).period() == math.inf


def test_rabi_amplitudes_match_direct_evolution() -> None:
    system = TwoStateSystem(E_s=0.9, E_a=0.5)
    t = np.linspace(0.0, 20.0, 41)
    up, down = rabi_evolution(system, t)
    direct_up, direct_down = two_level_evolution(0.9, 0.5, t)
    assert np.allclose(up, direct_up, atol=1e-12)
    assert np.allclose(down, direct_down, atol=1e-12)
    assert np.allclose(np.abs(up) ** 2 + np.abs(down) ** 2, 1.0)
    flipped, _ = rabi_evolution(system, 0.5 * system.period())
    assert abs(flipped) ** 2 == pytest.approx(1.0)


def test_rabi_evolution_starts_from_initial_state() -> None:
    system = TwoStateSystem(E_s=0.9, E_a=0.5, initial_up=1.0, initial_down=0.0)
    up, down = rabi_evolution(system, 0.0)
    assert abs(up - 1.0) < 1e-15 and abs(down) < 1e-15
    up, down = rabi_evolution(system, 0.5 * system.period())
    assert abs(up) == pytest.approx(0.0, abs=1e-12)
    assert abs(down) ** 2 == pytest.approx(1.0)


def test_rabi_evolution_of_general_state_matches_matrix_exponential() -> None:
    initial = np.array([0.6, 0.8j])
    system = TwoStateSystem(E_s=0.9, E_a=0.5, initial_up=initial[0], initial_down=initial[1])
    # H = mean + Omega sigma_x in the (up, down) basis
    hamiltonian = np.array([[0.7, 0.2], [0.2, 0.7]], dtype=complex)
    for t in (0.0, 1.3, 7.9):
        expected = expm(-1j * hamiltonian * t) @ initial
        up, down = rabi_evolution(system, t)
        assert np.allclose([up, down], expected, atol=1e-12)


def test_two_state_system_rejects_unnormalized_state() -> None:
    with pytest.raises(ValueError, match="normalized"):
        TwoStateSystem(E_s=0.9, E_a=0.5, initial_up=1.0, initial_down=1.0)


def test_two_state_spinor_starts_spin_down_at_lower_well() -> None:
    solution = solve_perturbation(0, 2, Branch.SYMMETRIC, PhysicsConfig(b=2.0))
    symmetric = synthesize_wavefunction(solution, 0.0, Z)
    antisymmetric = synthesize_wavefunction(solution.with_branch(Branch.ANTISYMMETRIC), 0.0, Z)
    system = TwoStateSystem(E_s=symmetric.energy, E_a=antisymmetric.energy)
    state = rabi_spinor(system, symmetric, antisymmetric, 0.0)
    assert np.allclose(state.zplus, 0.0, atol=1e-12)
    assert state.mean_z == pytest.approx(-2.0, abs=1e-8)
    upper = rabi_spinor(TwoStateSystem(E_s=system.E_s, E_a=system.E_a, initial_up=1.0, initial_down=0.0),
                        symmetric, antisymmetric, 0.0)
    assert np.allclose(upper.zminus, 0.0, atol=1e-12)
    assert upper.mean_z == pytest.approx(0.0, abs=1e-8)


def test_cylinder_spinor_keeps_norm() -> None:
    profile = _profile(0.5)
    phi = np.linspace(0.0, 2.0 * math.pi, 16, endpoint=False)
    field = assemble_cylinder_spinor(profile, phi)
    assert field.components == 2
    assert field.shape == (Z.size, 16)
    assert field.norm() == pytest.approx(1.0, rel=1e-12)
    assert field.metadata["branch"] == "symmetric"
