"""Command-line interface: one executable, one subcommand per analysis.

Subcommands: geometry, spectrum, simulate, orientation, steady-state,
tolerance.  Every run resolves its parameters from defaults, then an
optional JSON config file (``--config``), then explicit flags (flags
win), writes a CSV to ``--out``, and drops a JSON sidecar
``<out>.meta.json`` holding the fully resolved configuration; replaying
a sidecar via ``--config`` reproduces the outputs byte for byte.

Angles on the command line are radians unless suffixed with ``deg``
(e.g. ``--beta 6deg``); a ``rad`` suffix is accepted and redundant.

Exit codes: 0 success, 2 configuration/validation, 3 singular point,
4 divergence budget exceeded, 5 I/O.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import cavity_geometry as cg
from .classical_dynamics import (
    Branch,
    OpoParams,
    integrate_classical,
    steady_state,
    thresholds,
)
from .errors import (
    BelowThresholdError,
    DivergenceBudgetError,
    DivergenceError,
    DopoError,
    InsufficientData,
    InvalidRegime,
    NoBracketError,
    NoStationaryState,
    SingularityError,
    StabilityError,
    TrajectoryDiverged,
)
from .linear_spectra import spectrum_grid
from .orientation_analysis import orientation_variance_vs_time
from .phase_space import PhaseSpaceState
from .stochastic_engine import (
    SdeConfig,
    estimate_noise_spectrum,
    run_spectral_ensemble,
)
from .tables import SpectrumTable

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SINGULARITY = 3
EXIT_DIVERGENCE = 4
EXIT_IO = 5

_CONFIG_ERRORS = (
    ValueError,
    StabilityError,
    NoBracketError,
    BelowThresholdError,
    NoStationaryState,
    InvalidRegime,
    InsufficientData,
    DivergenceError,
)


def parse_angle(text) -> float:
    """Angle from a flag/config value: radians unless suffixed with deg."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().lower()
    if s.endswith("deg"):
        return math.radians(float(s[:-3]))
    if s.endswith("rad"):
        return float(s[:-3])
    return float(s)


def _fmt(v) -> str:
    return repr(float(v))


def _write_csv(path, columns, rows):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_table(path, table: SpectrumTable):
    table.write_csv(path)


def _write_sidecar(out_path, subcommand, resolved, extra=None):
    meta = {"subcommand": subcommand, "config": resolved}
    if extra:
        meta.update(extra)
    with open(str(out_path) + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _load_config(path) -> dict:
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("config file must hold a JSON object")
    # a sidecar replays as a config: its resolved settings live under "config"
    if "config" in raw and isinstance(raw["config"], dict):
        return raw["config"]
    return raw


def _resolve(schema: dict, args: argparse.Namespace, file_cfg: dict) -> dict:
    """defaults < config file < explicit flags; unknown file keys rejected."""
    unknown = set(file_cfg) - set(schema)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    resolved = {}
    for key, (conv, default) in schema.items():
        value = default
        if key in file_cfg and file_cfg[key] is not None:
            value = conv(file_cfg[key])
        flag_val = getattr(args, key.replace("-", "_"), None)
        if flag_val is not None:
            value = conv(flag_val)
        resolved[key] = value
    return resolved


def _geometry_from_resolved(resolved, beta=0.0, epsilon=0.0):
    cfg = {
        "L": resolved["L"],
        "R": resolved["R"],
        "lc": resolved["lc"],
        "nc": resolved["nc"],
        "T": resolved["T"],
        "c": resolved["c"],
        "beta": beta,
    }
    if resolved.get("R2x") is not None:
        cfg["R2x"] = resolved["R2x"]
    if resolved.get("R2y") is not None:
        cfg["R2y"] = resolved["R2y"]
    else:
        cfg["epsilon"] = epsilon
    return cg.geometry_from_config(cfg)


def _add_geometry_flags(p):
    p.add_argument("--L", type=float, help="cavity length (default 1)")
    p.add_argument("--R", type=float, help="mirror-1 curvature radius (default 2L)")
    p.add_argument("--R2x", type=float, help="mirror-2 x radius (default R)")
    p.add_argument("--R2y", type=float, help="mirror-2 y radius (overrides ellipticity)")
    p.add_argument("--lc", type=float, help="crystal length (default 0.1L)")
    p.add_argument("--nc", type=float, help="crystal refractive index (default 2)")
    p.add_argument("--T", type=float, help="output-coupler transmissivity (default 0.01)")
    p.add_argument("--c", type=float, help="speed of light (default 1)")


_GEOM_SCHEMA = {
    "L": (float, 1.0),
    "R": (float, 2.0),
    "R2x": (lambda v: None if v is None else float(v), None),
    "R2y": (lambda v: None if v is None else float(v), None),
    "lc": (float, 0.1),
    "nc": (float, 2.0),
    "T": (float, 0.01),
    "c": (float, 1.0),
}


def _run_geometry(args) -> int:
    file_cfg = _load_config(args.config) if args.config else {}
    schema = dict(_GEOM_SCHEMA)
    schema.update(
        {
            "beta-min": (parse_angle, 0.0),
            "beta-max": (parse_angle, math.radians(10.0)),
            "beta-steps": (int, 51),
            "eps-min": (float, 0.0),
            "eps-max": (float, 3e-3),
            "eps-steps": (int, 51),
        }
    )
    resolved = _resolve(schema, args, file_cfg)
    if resolved["beta-steps"] < 1 or resolved["eps-steps"] < 1:
        raise ValueError("sweep steps must be >= 1")
    rows = []
    for beta in np.linspace(
        resolved["beta-min"], resolved["beta-max"], resolved["beta-steps"]
    ):
        geom = _geometry_from_resolved(resolved, beta=float(beta), epsilon=0.0)
        rows.append(
            (
                beta,
                0.0,
                abs(cg.detuning_normalized(geom)),
                cg.detuning_small_anisotropy(geom),
            )
        )
    for eps in np.linspace(resolved["eps-min"], resolved["eps-max"], resolved["eps-steps"]):
        geom = _geometry_from_resolved(resolved, beta=0.0, epsilon=float(eps))
        rows.append(
            (
                0.0,
                eps,
                abs(cg.detuning_normalized(geom)),
                cg.detuning_small_anisotropy(geom),
            )
        )
    columns = ("beta_rad", "epsilon", "delta_over_gammas_exact", "delta_over_gammas_approx")
    _write_csv(args.out, columns, rows)
    _write_sidecar(args.out, "geometry", resolved)
    return EXIT_OK


_SPECTRUM_SCHEMA = {
    "delta-tilde": (float, 0.1),
    "phi": (lambda v: [parse_angle(x) for x in v], [0.0, math.pi / 2]),
    "omega-min": (float, -4.0),
    "omega-max": (float, 4.0),
    "omega-steps": (int, 201),
}


def _run_spectrum(args) -> int:
    file_cfg = _load_config(args.config) if args.config else {}
    resolved = _resolve(_SPECTRUM_SCHEMA, args, file_cfg)
    if resolved["omega-steps"] < 1:
        raise ValueError("omega-steps must be >= 1")
    params = OpoParams.from_dimensionless(sigma=1.5, delta_tilde=resolved["delta-tilde"])
    omegas = np.linspace(resolved["omega-min"], resolved["omega-max"], resolved["omega-steps"])
    table = spectrum_grid(params, omegas, resolved["phi"])
    _write_table(args.out, table)
    _write_sidecar(args.out, "spectrum", resolved)
    return EXIT_OK


_SIMULATE_SCHEMA = {
    "sigma": (float, 1.5),
    "chi-tilde": (float, 1e-3),
    "gamma-p-tilde": (float, 1.0),
    "delta-tilde": (float, 0.2),
    "dt": (float, 1e-3),
    "t-burn": (float, 100.0),
    "t-sample": (float, 400.0),
    "n-traj": (int, 400),
    "seed": (int, 1),
    "phi": (lambda v: [parse_angle(x) for x in v], [math.pi / 2]),
    "mode": (str, "y"),
    "scheme": (str, "euler-maruyama"),
    "divergence-threshold": (lambda v: None if v is None else float(v), None),
    "sample-dt": (lambda v: None if v is None else float(v), None),
    "n-segments": (int, 4),
    "omega-max": (float, 4.0),
    "threads": (int, 1),
}


def _run_simulate(args) -> int:
    file_cfg = _load_config(args.config) if args.config else {}
    resolved = _resolve(_SIMULATE_SCHEMA, args, file_cfg)
    params = OpoParams.from_dimensionless(
        sigma=resolved["sigma"],
        delta_tilde=resolved["delta-tilde"],
        chi_tilde=resolved["chi-tilde"],
        gamma_p_tilde=resolved["gamma-p-tilde"],
    )
    cfg = SdeConfig(
        dt=resolved["dt"],
        t_burn=resolved["t-burn"],
        t_sample=resolved["t-sample"],
        n_traj=resolved["n-traj"],
        seed=resolved["seed"],
        divergence_threshold=resolved["divergence-threshold"],
        scheme=resolved["scheme"],
    )
    ens = run_spectral_ensemble(
        params,
        cfg,
        sample_dt=resolved["sample-dt"],
        n_segments=resolved["n-segments"],
        workers=resolved["threads"],
    )
    tables = [
        estimate_noise_spectrum(
            ens, mode=resolved["mode"], phi=phi, max_omega_tilde=resolved["omega-max"]
        )
        for phi in resolved["phi"]
    ]
    data = np.vstack([t.data for t in tables])
    merged = SpectrumTable(columns=tables[0].columns, data=data, provenance="simulated")
    _write_table(args.out, merged)
    _write_sidecar(
        args.out,
        "simulate",
        resolved,
        extra={
            "divergence": {
                "n_diverged": ens.n_diverged,
                "n_traj": ens.n_traj,
                "events": ens.diverged_seeds,
            },
            "branch_cut_samples": ens.branch_cut_samples,
        },
    )
    return EXIT_OK


_ORIENTATION_SCHEMA = {
    "delta-tilde": (float, 0.1),
    "rho2": (lambda v: None if v is None else float(v), None),
    "sigma": (float, 1.5),
    "chi-tilde": (float, 1e-2),
    "gamma-p-tilde": (float, 1.0),
    "n-traj": (int, 256),
    "t-end": (float, 200.0),
    "dt": (float, 1e-3),
    "seed": (int, 1),
    "source": (str, "full"),
    "sample-dt": (lambda v: None if v is None else float(v), None),
    "threads": (int, 1),
}


def _run_orientation(args) -> int:
    file_cfg = _load_config(args.config) if args.config else {}
    resolved = _resolve(_ORIENTATION_SCHEMA, args, file_cfg)
    if getattr(args, "reduced", False):
        resolved["source"] = "reduced"
    if getattr(args, "full", False):
        resolved["source"] = "full"
    if resolved["rho2"] is not None:
        # pick the coupling that puts the requested photon number at sigma
        sigma = resolved["sigma"]
        if sigma <= 1.0:
            raise ValueError("rho2 requires sigma > 1")
        chi_tilde = math.sqrt(2.0 * (sigma - 1.0) * resolved["gamma-p-tilde"] / resolved["rho2"])
    else:
        chi_tilde = resolved["chi-tilde"]
    params = OpoParams.from_dimensionless(
        sigma=resolved["sigma"],
        delta_tilde=resolved["delta-tilde"],
        chi_tilde=chi_tilde,
        gamma_p_tilde=resolved["gamma-p-tilde"],
    )
    cfg = SdeConfig(
        dt=resolved["dt"],
        t_burn=resolved["dt"],  # watch growth from the deterministic start
        t_sample=resolved["t-end"],
        n_traj=resolved["n-traj"],
        seed=resolved["seed"],
    )
    table = orientation_variance_vs_time(
        params,
        cfg,
        source=resolved["source"],
        sample_dt=resolved["sample-dt"],
        workers=resolved["threads"],
    )
    _write_table(args.out, table)
    _write_sidecar(args.out, "orientation", resolved)
    return EXIT_OK


_STEADY_SCHEMA = {
    "sigma": (float, 1.5),
    "chi-tilde": (float, 1e-3),
    "gamma-p-tilde": (float, 1.0),
    "delta-tilde": (float, 0.0),
    "t-end": (float, 50.0),
    "dt": (float, 1e-2),
    "perturb": (float, 0.0),
    "perturb-seed": (int, 1),
}


def _run_steady_state(args) -> int:
    file_cfg = _load_config(args.config) if args.config else {}
    resolved = _resolve(_STEADY_SCHEMA, args, file_cfg)
    params = OpoParams.from_dimensionless(
        sigma=resolved["sigma"],
        delta_tilde=resolved["delta-tilde"],
        chi_tilde=resolved["chi-tilde"],
        gamma_p_tilde=resolved["gamma-p-tilde"],
    )
    ss = steady_state(params)
    e_x, e_y = thresholds(params)
    label = "below-threshold" if ss.branch is Branch.BELOW_THRESHOLD else "above-threshold"
    print(f"branch    : {label}")
    print(f"alpha0    : {ss.alpha0}")
    print(f"rho       : {ss.rho}")
    print(f"E_th_x    : {e_x}")
    print(f"E_th_y    : {e_y}")
    if args.out:
        _write_csv(
            args.out,
            ("sigma", "delta_tilde", "branch_above", "alpha0_re", "rho", "e_th_x", "e_th_y"),
            [
                (
                    resolved["sigma"],
                    resolved["delta-tilde"],
                    1.0 if ss.branch is Branch.ABOVE_THRESHOLD else 0.0,
                    np.real(ss.alpha0),
                    ss.rho,
                    e_x,
                    e_y,
                )
            ],
        )
        _write_sidecar(args.out, "steady-state", resolved)
    if args.trajectory_out:
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(entropy=resolved["perturb-seed"]))
        )
        scale = resolved["perturb"] * max(ss.rho, abs(ss.alpha0), 1.0)
        kick = scale * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
        init = PhaseSpaceState.from_classical(
            ss.alpha0 + kick[0], ss.alphax + kick[1], ss.alphay + kick[2]
        )
        traj = integrate_classical(
            params, init, t_end=resolved["t-end"], dt=resolved["dt"]
        )
        rows = np.column_stack(
            [
                traj.t,
                traj.a0.real,
                traj.a0.imag,
                traj.ax.real,
                traj.ax.imag,
                traj.ay.real,
                traj.ay.imag,
            ]
        )
        _write_csv(
            args.trajectory_out,
            ("t", "re_a0", "im_a0", "re_ax", "im_ax", "re_ay", "im_ay"),
            rows,
        )
    return EXIT_OK


_TOLERANCE_SCHEMA = dict(_GEOM_SCHEMA)
_TOLERANCE_SCHEMA["target-v"] = (float, 1.0 / 11.0)


def _run_tolerance(args) -> int:
    file_cfg = _load_config(args.config) if args.config else {}
    resolved = _resolve(_TOLERANCE_SCHEMA, args, file_cfg)
    geom = _geometry_from_resolved(resolved)
    target = resolved["target-v"]
    beta_max, eps_max = cg.anisotropy_tolerance(geom, target)
    dt_max = target / (1.0 - target)
    print(f"target V_opt     : {target}")
    print(f"|Delta|/gamma_s  : {dt_max}")
    print(f"beta_max         : {beta_max} rad = {math.degrees(beta_max)} deg")
    print(f"epsilon_max      : {eps_max}")
    if args.out:
        _write_csv(
            args.out,
            ("target_v_opt", "delta_tilde_max", "beta_max_rad", "epsilon_max"),
            [(target, dt_max, beta_max, eps_max)],
        )
        _write_sidecar(args.out, "tolerance", resolved)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dopo",
        description="Two-transverse-mode degenerate OPO: anisotropy, spectra, simulation.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (or a run sidecar)")
    common.add_argument("--out", help="output CSV path")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--threads", type=int, help="worker processes for ensembles")

    p = sub.add_parser("geometry", parents=[common], help="anisotropy sweep of the detuning")
    _add_geometry_flags(p)
    p.add_argument("--beta-min", type=parse_angle)
    p.add_argument("--beta-max", type=parse_angle)
    p.add_argument("--beta-steps", type=int)
    p.add_argument("--eps-min", type=float)
    p.add_argument("--eps-max", type=float)
    p.add_argument("--eps-steps", type=int)
    p.set_defaults(func=_run_geometry, needs_out=True)

    p = sub.add_parser("spectrum", parents=[common], help="analytic dark-mode noise spectra")
    p.add_argument("--delta-tilde", type=float)
    p.add_argument("--phi", action="append", type=parse_angle, help="repeatable quadrature angle")
    p.add_argument("--omega-min", type=float)
    p.add_argument("--omega-max", type=float)
    p.add_argument("--omega-steps", type=int)
    p.set_defaults(func=_run_spectrum, needs_out=True)

    p = sub.add_parser("simulate", parents=[common], help="positive-P ensemble spectra")
    p.add_argument("--sigma", type=float)
    p.add_argument("--chi-tilde", type=float)
    p.add_argument("--gamma-p-tilde", type=float)
    p.add_argument("--delta-tilde", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-burn", type=float)
    p.add_argument("--t-sample", type=float)
    p.add_argument("--n-traj", type=int)
    p.add_argument("--phi", action="append", type=parse_angle)
    p.add_argument("--mode", choices=("x", "y"))
    p.add_argument("--scheme", choices=("euler-maruyama", "semi-implicit-midpoint"))
    p.add_argument("--divergence-threshold", type=float)
    p.add_argument("--sample-dt", type=float)
    p.add_argument("--n-segments", type=int)
    p.add_argument("--omega-max", type=float)
    p.set_defaults(func=_run_simulate, needs_out=True)

    p = sub.add_parser("orientation", parents=[common], help="orientation variance vs time")
    p.add_argument("--delta-tilde", type=float)
    p.add_argument("--rho2", type=float, help="bright photon number (sets coupling)")
    p.add_argument("--sigma", type=float)
    p.add_argument("--chi-tilde", type=float)
    p.add_argument("--gamma-p-tilde", type=float)
    p.add_argument("--n-traj", type=int)
    p.add_argument("--t-end", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--sample-dt", type=float)
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--reduced", action="store_true", help="reduced linear system")
    grp.add_argument("--full", action="store_true", help="full nonlinear engine (default)")
    p.set_defaults(func=_run_orientation, needs_out=True)

    p = sub.add_parser("steady-state", parents=[common], help="classical steady state")
    p.add_argument("--sigma", type=float)
    p.add_argument("--chi-tilde", type=float)
    p.add_argument("--gamma-p-tilde", type=float)
    p.add_argument("--delta-tilde", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--perturb", type=float, help="relative kick for the trajectory dump")
    p.add_argument("--perturb-seed", type=int)
    p.add_argument("--trajectory-out", help="CSV path for a deterministic trajectory dump")
    p.set_defaults(func=_run_steady_state, needs_out=False)

    p = sub.add_parser("tolerance", parents=[common], help="anisotropy budget for a squeezing target")
    _add_geometry_flags(p)
    p.add_argument("--target-v", type=float, help="target optimum noise level in (0,1)")
    p.set_defaults(func=_run_tolerance, needs_out=False)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "needs_out", False) and not args.out:
        print("error: --out is required for this subcommand", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except SingularityError as exc:
        print(f"singularity: {exc}", file=sys.stderr)
        return EXIT_SINGULARITY
    except (DivergenceBudgetError, TrajectoryDiverged) as exc:
        print(f"divergence budget: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except _CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DopoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
