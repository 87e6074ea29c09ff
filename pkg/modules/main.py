import argparse
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from modules.BasisHandler import eigenfunction, get_evaluator
from modules.ClosedFormHandler import energy_corrections_closed, zplus_correction
from modules.ConfigurationHandler import PhysicsConfig, config_from_args, register_setup, with_overrides
from modules.LoggerHandler import get_logger
from modules.OracleHandler import (
    build_coupled_matrix,
    exact_spectrum,
    parity_operator,
    richardson_order_check,
    spectra_for,
    truncation_sensitivity,
    two_level_evolution,
)
from modules.OutputHandler import (
    OMITTED_PHASE_NOTE,
    FrameSpec,
    global_max,
    output_root,
    write_frames,
    write_manifest,
)
from modules.SeriesHandler import (
    convergence_ratio,
    order_component,
    solve_levels,
    solve_perturbation,
    synthesize_wavefunction,
)
from modules.SpinHandler import (
    TwoStateSystem,
    assemble_cylinder_spinor,
    eigen_energies,
    peak_separation,
    rabi_evolution,
    rabi_spinor,
    spin_field,
)
from modules.SpinlessHandler import (
    AngularProfile,
    centroid,
    classical_position,
    energy,
    extract_modes,
    fourier_transform_protocol,
    readout_window,
)
from modules.spinor import Branch
from modules.utils import ConfigurationError, ProcessCommand, read_project_config, write_csv

logger = get_logger()

ORACLE_EPSILON_FRACTIONS = (0.2, 0.5, 1.0)


class CommandTree:
    """argparse subcommands registered by decorator, one handler per command."""

    def __init__(self, parser: argparse.ArgumentParser, common: argparse.ArgumentParser):
        self.parser = parser
        self.common = common
        self.subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
        self.commands: Dict[str, argparse.ArgumentParser] = {}

    def command(self, name: str, description: str, arguments: Sequence[tuple] = (), base: Optional[dict] = None):
        """
        ``base`` holds config values this command prefers over the global
        defaults; a config file and flags still win over them. It must not go
        through argparse defaults, since the common actions are shared by
        every subparser.
        """
        def decorator(handler: Callable[[argparse.Namespace], int]):
            sub = self.subparsers.add_parser(name, help=description, description=description, parents=[self.common])
            for flags, options in arguments:
                sub.add_argument(*flags, **options)
            sub.set_defaults(handler=handler, command_base=dict(base or {}))
            self.commands[name] = sub
            return handler

        return decorator


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--b", type=float, help="oscillator spacing b")
    common.add_argument("--epsilon", type=float, help="spin coupling epsilon")
    common.add_argument("--ell", type=int, help="angular mode ell")
    common.add_argument("--order", type=int, help="perturbation order K")
    common.add_argument("--frames", type=int, help="number of time samples or frames")
    common.add_argument("--t-max", dest="t_max", type=float, help="final time")
    common.add_argument("--grid", help="sampling grid NPHIxNZ")
    common.add_argument("--profile", help="angular profile: const, cos, sin, staircase or modes:ell=value,...")
    common.add_argument("--out", help="output directory (default: $CYLQ_OUT_DIR/<command>)")
    common.add_argument("--config", type=Path, help="key = value configuration file")
    return common


def _times(args, default_frames: int, default_t_max: float) -> np.ndarray:
    frames = args.frames if args.frames is not None else default_frames
    t_max = args.t_max if args.t_max is not None else default_t_max
    if frames < 1:
        raise ConfigurationError("frames must be at least 1")
    return np.linspace(0.0, t_max, frames) if frames > 1 else np.array([t_max])


class CylinderLab:
    def __init__(self):
        project = read_project_config()
        self.parser = argparse.ArgumentParser(
            prog="cylq",
            description=f"{project.get('name')} {project.get('version')}: {project.get('description')}",
        )
        self.tree = CommandTree(self.parser, _common_flags())

        register_setup(self)

        @self.tree.command(
            name="spectrum",
            description="Energy levels n + 1/2 and eigenfunctions centred at -ell*b",
            arguments=[(("--levels",), {"type": int, "default": 6, "help": "number of levels"})],
        )
        @ProcessCommand(self)
        def spectrum(args, config: PhysicsConfig, out: Path):
            highest = get_evaluator().max_order
            if not 1 <= args.levels <= highest + 1:
                raise ConfigurationError(f"levels must be between 1 and {highest + 1}")
            levels = list(range(args.levels))
            z = config.z_samples()
            center = -config.ell * config.b
            files = [
                write_csv(out / "spectrum.csv",
                          {"n": levels, "ell": [config.ell] * len(levels), "energy": [energy(n, config.ell) for n in levels]},
                          comment=f"levels of mode ell={config.ell}; every ell has the same ladder"),
                write_csv(out / "eigenfunctions.csv",
                          {"z": z, **{f"psi_{n}": eigenfunction(n, center, z) for n in levels}},
                          comment=f"normalized eigenfunctions centred at z={center:g}"),
            ]
            write_manifest(out, "spectrum", config, files)

        @self.tree.command(
            name="evolve",
            description="Coherent evolution of one angular mode released at z = 0",
        )
        @ProcessCommand(self)
        def evolve(args, config: PhysicsConfig, out: Path):
            times = _times(args, default_frames=9, default_t_max=2.0 * math.pi)
            phi, z = config.phi_samples(), config.z_samples()
            profile = AngularProfile({config.ell: 1.0})
            fields = [fourier_transform_protocol(profile, config.b, t, phi, z) for t in times]
            spec = FrameSpec(out_dir=out, prefix="evolve", times=times, vmax=global_max(fields),
                             grid_shape=(config.n_phi, config.n_z))
            files = write_frames(fields, spec)
            files.append(write_csv(
                out / "trajectory.csv",
                {
                    "t": times,
                    "mean_z": [centroid(f) for f in fields],
                    "classical_z": classical_position(0.0, config.ell * config.b, times),
                    "norm": [f.norm() for f in fields],
                },
                comment="quantum centroid against the classical orbit",
            ))
            write_manifest(out, "evolve", config, files, {"omitted_phase": OMITTED_PHASE_NOTE})

        @self.tree.command(
            name="fourier",
            description="Angular Fourier modes separated along z at half period",
            base={"b": 8.0},
        )
        @ProcessCommand(self)
        def fourier(args, config: PhysicsConfig, out: Path):
            profile = AngularProfile.named(args.profile or "staircase")
            times = _times(args, default_frames=9, default_t_max=math.pi)
            window = readout_window(profile, config.b)
            logger.info(f"Fourier window z in [{window[0]:g}, {window[1]:g}] for modes {sorted(profile.modes)}",
                        extra={"run": "fourier"})
            config = with_overrides(config, z_min=window[0], z_max=window[1])
            phi, z = config.phi_samples(), config.z_samples()
            fields = [fourier_transform_protocol(profile, config.b, t, phi, z) for t in times]
            spec = FrameSpec(out_dir=out, prefix="fourier", times=times, vmax=global_max(fields),
                             grid_shape=(config.n_phi, config.n_z))
            files = write_frames(fields, spec)
            half_period = fourier_transform_protocol(profile, config.b, math.pi, phi, z)
            ells = sorted(profile.modes)
            measured = extract_modes(half_period, config.b, ells)
            largest = max(abs(value) for value in profile.modes.values())
            files.append(write_csv(
                out / "modes.csv",
                {
                    "ell": ells,
                    "z_peak": [-2.0 * ell * config.b for ell in ells],
                    "expected": [abs(profile.modes[ell]) / largest for ell in ells],
                    "measured": [measured[ell] for ell in ells],
                },
                comment="peak amplitudes at t=pi relative to the largest mode",
            ))
            write_manifest(out, "fourier", config, files,
                           {"omitted_phase": OMITTED_PHASE_NOTE, "profile": {str(k): str(v) for k, v in profile.modes.items()}})

        @self.tree.command(
            name="perturb",
            description="Ground-state energy corrections and spin-up wavefunction corrections by order",
            arguments=[(("--levels",), {"type": int, "default": 1, "help": "also tabulate E_n^(k) for n < levels"})],
        )
        @ProcessCommand(self)
        def perturb(args, config: PhysicsConfig, out: Path):
            K = config.series_order
            solution = solve_perturbation(0, K, Branch.SYMMETRIC, config)
            closed = energy_corrections_closed(config.b)
            orders = list(range(K + 1))
            files = [write_csv(
                out / "energies.csv",
                {
                    "k": orders,
                    "E": solution.energies,
                    "E_closed": [closed[k] if k < len(closed) else float("nan") for k in orders],
                },
                comment=f"ground-state corrections E_0^(k), b={config.b}",
            )]
            z = config.z_samples()
            columns = {"z": z}
            for k in orders:
                columns[f"Z{k}"] = order_component(solution, k, z)
                if 1 <= k <= 2:
                    columns[f"Z{k}_closed"] = zplus_correction(k, config.b, z, config.quad_nodes)
            profile = synthesize_wavefunction(solution, config.epsilon, z)
            columns["Zplus"] = profile.zplus
            columns["Zminus"] = profile.zminus
            files.append(write_csv(out / "profiles.csv", columns,
                                   comment=f"order components (unnormalized) and the normalized symmetric spinor at eps={config.epsilon}"))
            ratio = convergence_ratio(solution, config.epsilon)
            logger.info(f"Epsilon series convergence ratio {ratio:.4g}", extra={"run": "perturb"})
            if args.levels > 1:
                by_level = solve_levels(range(args.levels), K, config)
                files.append(write_csv(
                    out / "level_energies.csv",
                    {"n": list(by_level), **{f"E{k}": [by_level[n].energies[k] for n in by_level] for k in orders}},
                    comment=f"energy corrections E_n^(k) of the unperturbed levels, b={config.b}",
                ))
            write_manifest(out, "perturb", config, files,
                           {"convergence_ratio": ratio, "energy_symmetric": solution.energy(config.epsilon)})

        @self.tree.command(
            name="oracle",
            description="Fock-basis diagonalization against the perturbation series",
        )
        @ProcessCommand(self)
        def oracle(args, config: PhysicsConfig, out: Path):
            matrix = build_coupled_matrix(config)
            values, vectors = exact_spectrum(matrix)
            parity = parity_operator(matrix.N)
            parities = np.einsum("ij,ik,kj->j", vectors, parity, vectors)
            files = [write_csv(out / "eigenvalues.csv",
                               {"index": np.arange(values.size), "eigenvalue": values, "parity": parities},
                               comment=f"coupled Fock matrix, N={matrix.N}, eps={config.epsilon}")]
            solution = solve_perturbation(0, config.series_order, Branch.SYMMETRIC, config)
            antisymmetric = solution.with_branch(Branch.ANTISYMMETRIC)
            eps_values = [fraction * config.epsilon for fraction in ORACLE_EPSILON_FRACTIONS]
            rows = {"epsilon": [], "series_s": [], "oracle_s": [], "series_a": [], "oracle_a": []}
            for eps, (e_s, e_a) in zip(eps_values, spectra_for(config, eps_values)):
                rows["epsilon"].append(eps)
                rows["series_s"].append(solution.energy(eps))
                rows["oracle_s"].append(e_s)
                rows["series_a"].append(antisymmetric.energy(eps))
                rows["oracle_a"].append(e_a)
            rows["residual_s"] = np.array(rows["series_s"]) - np.array(rows["oracle_s"])
            rows["residual_a"] = np.array(rows["series_a"]) - np.array(rows["oracle_a"])
            files.append(write_csv(out / "residuals.csv", rows, comment="series minus oracle for both branches"))
            notes = {}
            if config.epsilon != 0.0:
                check = richardson_order_check(rows["series_s"], rows["oracle_s"], eps_values)
                notes["richardson_slope"] = None if check.indistinguishable else check.slope
                logger.info(
                    f"Residual slope {check.slope:.3f} (expected about {config.series_order + 1})"
                    if not check.indistinguishable else "Series and oracle indistinguishable",
                    extra={"run": "oracle"},
                )
            if matrix.N > 20:
                sensitivity = truncation_sensitivity(config, matrix.N - 20, matrix.N)
                notes["truncation_sensitivity"] = sensitivity
                logger.info(f"Lowest eigenvalues move by {sensitivity:.2e} from N={matrix.N - 20} to N={matrix.N}",
                            extra={"run": "oracle"})
            write_manifest(out, "oracle", config, files, notes)

        @self.tree.command(
            name="spin",
            description="Spinor components, density and spin direction of a ground-state branch",
            arguments=[(("--branch",), {"choices": [b.value for b in Branch], "default": Branch.SYMMETRIC.value})],
        )
        @ProcessCommand(self)
        def spin(args, config: PhysicsConfig, out: Path):
            solution = solve_perturbation(0, config.series_order, Branch(args.branch), config)
            z = config.z_samples()
            profile = synthesize_wavefunction(solution, config.epsilon, z, ell=config.ell)
            field = spin_field(profile, phi=0.0)
            files = [write_csv(
                out / "spin.csv",
                {"z": z, "Zplus": profile.zplus, "Zminus": profile.zminus, "rho": field.rho, "alpha": field.alpha},
                comment=f"{profile.branch.value} branch, eps={config.epsilon}, energy={profile.energy!r}",
            )]
            spinor = assemble_cylinder_spinor(profile, config.phi_samples())
            spec = FrameSpec(out_dir=out, prefix="spin", times=[0.0], vmax=global_max([spinor]),
                             grid_shape=(config.n_phi, config.n_z))
            files.extend(write_frames([spinor], spec))
            write_manifest(out, "spin", config, files, {
                "branch": profile.branch.value,
                "energy": profile.energy,
                "peak_separation": peak_separation(profile),
            })

        @self.tree.command(
            name="rabi",
            description="Two-state beating between the symmetric and antisymmetric ground states",
        )
        @ProcessCommand(self)
        def rabi(args, config: PhysicsConfig, out: Path):
            solution = solve_perturbation(0, config.series_order, Branch.SYMMETRIC, config)
            E_s, E_a = eigen_energies(config, solution)
            system = TwoStateSystem(E_s=E_s, E_a=E_a)
            times = _times(args, default_frames=101, default_t_max=system.period())
            amp_up, amp_down = rabi_evolution(system, times)
            oracle_up, _ = two_level_evolution(E_s, E_a, times)
            z = config.z_samples()
            symmetric = synthesize_wavefunction(solution, config.epsilon, z)
            antisymmetric = synthesize_wavefunction(solution.with_branch(Branch.ANTISYMMETRIC), config.epsilon, z)
            mean_z = [rabi_spinor(system, symmetric, antisymmetric, t).mean_z for t in times]
            files = [write_csv(
                out / "rabi.csv",
                {
                    "t": times,
                    "P_up": np.abs(amp_up) ** 2,
                    "P_down": np.abs(amp_down) ** 2,
                    "P_up_direct": np.abs(oracle_up) ** 2,
                    "mean_z": mean_z,
                },
                comment=f"Omega={system.omega!r}, E_s={E_s!r}, E_a={E_a!r}",
            )]
            write_manifest(out, "rabi", config, files, {"omega": system.omega})

        logger.debug(f"Registered commands: {', '.join(self.tree.commands)}", extra={"run": "Core"})

    def resolve_config(self, args) -> PhysicsConfig:
        return config_from_args(args)

    def resolve_output(self, args, command: str) -> Path:
        out = Path(args.out) if getattr(args, "out", None) else output_root() / command
        out.mkdir(parents=True, exist_ok=True)
        return out

    def run(self, argv: Optional[List[str]] = None) -> int:
        try:
            args = self.parser.parse_args(argv)
        except SystemExit as e:
            return 0 if e.code in (0, None) else 1
        if not getattr(args, "handler", None):
            self.parser.print_help()
            return 1
        return args.handler(args)
