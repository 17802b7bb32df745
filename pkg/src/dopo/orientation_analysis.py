"""Bright-mode orientation dynamics under cavity anisotropy.

Writing the bright mode at an angle theta(t) in the transverse plane and
expanding the amplitudes around the locked solution, the orientation and
the surviving dark-mode combination c1 obey (with the customary c0 = 0
gauge fixing the redundant variable)

    dx/dt = -M x + sqrt(2 gamma_s) * eta(t),
    x = (2 rho theta, c1),   M = [[0, i delta], [i delta, 2 gamma_s]],

driven by two independent real unit white noises.  For delta = 0 the
orientation diffuses freely (zero eigenvalue of M: variance grows
linearly in time); any anisotropy locks it, with stationary variance

    V_theta_inf = <theta^2> = 1 / (2 rho^2 Dt^2),      Dt = delta/gamma_s,

obtained equivalently from the stationary second-moment (Lyapunov)
equation M P + P M^T = 2 gamma_s I, whose exact solution in gamma_s
units is P = [[2/Dt^2, -i/Dt], [-i/Dt, 0]] and V_theta_inf = P11/(4 rho^2).

The trajectory estimator uses the c0 = 0 gauge identity
2 rho theta = ay + ay+ to linear order: theta_hat = Re[(ay + ay+)]/(2 rho),
with the imaginary part kept as a diagnostic instead of silently dropped.
Three tiers of evidence are available: the closed form, the reduced
linear SDE integrated directly, and the full nonlinear engine.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .classical_dynamics import OpoParams, steady_state
from .errors import (
    BelowThresholdError,
    InvalidRegime,
    LinearizationValidityWarning,
    NoStationaryState,
)
from .stochastic_engine import SdeConfig, ThetaEnsemble, TrajectorySeries, run_theta_ensemble
from .tables import SpectrumTable

__all__ = [
    "OrientationSystem",
    "ThetaSeries",
    "orientation_matrix",
    "stationary_covariance_lyapunov",
    "theta_variance_closed_form",
    "estimate_theta",
    "simulate_reduced_orientation",
    "orientation_variance_vs_time",
    "stationary_theta_variance",
    "slow_relaxation_rate",
]


@dataclass(frozen=True)
class OrientationSystem:
    """Reduced linear system for x = (2 rho theta, c1)."""

    M: np.ndarray
    noise_strength: float
    rho: float
    gamma_s: float
    delta: float

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.M)


@dataclass(frozen=True)
class ThetaSeries:
    """Orientation estimate along one trajectory, with residual diagnostic."""

    times: np.ndarray
    theta_hat: np.ndarray
    imag_residual: np.ndarray


def orientation_matrix(params: OpoParams) -> OrientationSystem:
    """Reduced drift matrix M = [[0, i delta], [i delta, 2 gamma_s]].

    M is symmetric with trace 2 gamma_s and det delta^2; a vanishing
    detuning therefore leaves a zero eigenvalue, the free orientation
    diffusion.  Raises BelowThresholdError when the bright mode is off.
    """
    ss = steady_state(params)
    if ss.rho == 0.0:
        raise BelowThresholdError("orientation dynamics requires rho > 0")
    gs, d = params.gamma_s, params.delta
    M = np.array([[0.0, 1j * d], [1j * d, 2.0 * gs]], dtype=complex)
    return OrientationSystem(
        M=M, noise_strength=np.sqrt(2.0 * gs), rho=ss.rho, gamma_s=gs, delta=d
    )


def stationary_covariance_lyapunov(sys: OrientationSystem) -> np.ndarray:
    """Stationary second-moment matrix P solving M P + P M^T = 2 gamma_s I.

    Solved as a linear system via Kronecker products (no Hermitian
    shortcut: M is complex symmetric, the transpose is meant literally).
    In gamma_s units the exact solution is [[2/Dt^2, -i/Dt], [-i/Dt, 0]].
    Raises NoStationaryState when delta = 0.
    """
    if sys.delta == 0.0:
        raise NoStationaryState("delta = 0 leaves a zero relaxation eigenvalue")
    eye = np.eye(2)
    # column-stacking vec: vec(MP) = (I (x) M) vec(P), vec(P M^T) = (M (x) I) vec(P)
    A = np.kron(eye, sys.M) + np.kron(sys.M, eye)
    rhs = (2.0 * sys.gamma_s * eye).reshape(4, order="F")
    p = np.linalg.solve(A, rhs)
    return p.reshape(2, 2, order="F")


def theta_variance_closed_form(rho: float, delta_tilde: float) -> float:
    """Stationary orientation variance 1/(2 rho^2 Dt^2).

    Equals P11/(4 rho^2) from the Lyapunov route.  Warns when the result
    is not small: the linearization assumes theta stays near zero, which
    holds only for V_theta_inf well below 1.
    """
    if rho <= 0:
        raise BelowThresholdError("closed form requires rho > 0")
    if delta_tilde == 0.0:
        raise NoStationaryState("delta = 0 has no stationary orientation variance")
    v = 1.0 / (2.0 * rho * rho * delta_tilde * delta_tilde)
    if v >= 0.1:
        warnings.warn(
            f"V_theta_inf = {v:.3g} is not small; the linearized treatment degrades",
            LinearizationValidityWarning,
            stacklevel=2,
        )
    return v


def estimate_theta(trajectory: TrajectorySeries, rho: float) -> ThetaSeries:
    """Orientation series from a full-engine trajectory.

    theta_hat = Re[(ay + ay+)/(2 rho)] in the c0 = 0 gauge; the imaginary
    part is returned as a diagnostic.  Raises InvalidRegime when the
    bright amplitude along the trajectory disagrees with the supplied rho
    by more than 10% (the expansion around the locked solution fails).
    """
    if rho <= 0:
        raise BelowThresholdError("estimator requires rho > 0")
    mean_ax = np.abs(trajectory.ax.mean())
    if abs(mean_ax - rho) > 0.1 * rho:
        raise InvalidRegime(
            f"trajectory bright amplitude {mean_ax:.4g} vs supplied rho {rho:.4g}: "
            "outside the 10% regime guard"
        )
    w = (trajectory.ay + trajectory.ayp) / (2.0 * rho)
    return ThetaSeries(times=trajectory.times, theta_hat=w.real, imag_residual=w.imag)


def slow_relaxation_rate(gamma_s: float, delta_tilde: float) -> float:
    """Smaller eigenvalue of M: gamma_s (1 - sqrt(1 - Dt^2)) for |Dt| < 1."""
    d2 = delta_tilde * delta_tilde
    if d2 < 1.0:
        return gamma_s * (1.0 - np.sqrt(1.0 - d2))
    return gamma_s  # complex pair, real part gamma_s


def simulate_reduced_orientation(
    delta_tilde: float,
    rho: float,
    n_traj: int,
    t_end: float,
    dt: float,
    seed: int,
    sample_dt: float | None = None,
    gamma_s: float = 1.0,
) -> ThetaEnsemble:
    """Euler-Maruyama integration of the reduced 2x2 linear system.

    Starts from x = 0 (the locked deterministic solution) and records
    w = x1/(2 rho) so the estimator convention matches the full engine.
    Trajectory streams are keyed like the full engine's, so the run is
    reproducible and worker-independent by construction (single process).
    """
    if rho <= 0:
        raise BelowThresholdError("reduced simulation requires rho > 0")
    if sample_dt is None:
        sample_dt = 100.0 * dt
    stride = max(1, int(round(sample_dt / dt)))
    sample_dt = stride * dt
    nsamp = int(round(t_end / sample_dt))
    n_steps = nsamp * stride
    delta = delta_tilde * gamma_s
    m01 = 1j * delta
    m11 = 2.0 * gamma_s
    amp = np.sqrt(2.0 * gamma_s)
    sqdt = np.sqrt(dt)

    from .stochastic_engine import _rng_for  # same stream convention

    x1 = np.zeros(n_traj, dtype=complex)
    x2 = np.zeros(n_traj, dtype=complex)
    rngs = [_rng_for(seed, i) for i in range(n_traj)]
    w_rec = np.empty((n_traj, nsamp), dtype=complex)
    block = 4096
    k = 0
    while k < n_steps:
        b = min(block, n_steps - k)
        noise = np.empty((b, 2, n_traj))
        for i, rng in enumerate(rngs):
            noise[:, :, i] = rng.standard_normal((b, 2))
        for q in range(b):
            w = noise[q]
            nx1 = x1 + dt * (-(m01 * x2)) + sqdt * amp * w[0]
            nx2 = x2 + dt * (-(m01 * x1) - m11 * x2) + sqdt * amp * w[1]
            x1, x2 = nx1, nx2
            step = k + q + 1
            if step % stride == 0:
                j = step // stride - 1
                if j < nsamp:
                    w_rec[:, j] = x1
        k += b
    times = sample_dt * (1 + np.arange(nsamp))
    return ThetaEnsemble(
        times=times,
        w=w_rec / (2.0 * rho),
        rho=rho,
        mean_ax=np.full(n_traj, rho, dtype=complex),
        traj_indices=np.arange(n_traj),
        n_diverged=0,
        diverged_seeds=[],
    )


def stationary_theta_variance(ens: ThetaEnsemble, t_min: float) -> tuple[float, float]:
    """Stationary Var(theta) by time averaging each trajectory past t_min.

    Per-trajectory time averages of theta_hat^2 are combined across the
    ensemble; the standard error comes from the across-trajectory scatter
    (order-insensitive reduction).
    """
    sel = ens.times >= t_min
    if not np.any(sel):
        raise ValueError(f"no samples at or after t_min = {t_min}")
    v_i = (ens.theta_hat[:, sel] ** 2).mean(axis=1)
    n = len(v_i)
    err = float(v_i.std(ddof=1) / np.sqrt(n)) if n > 1 else np.inf
    return float(v_i.mean()), err


def orientation_variance_vs_time(
    params: OpoParams | None,
    cfg: SdeConfig,
    source: str = "full",
    rho: float | None = None,
    delta_tilde: float | None = None,
    sample_dt: float | None = None,
    workers: int = 1,
) -> SpectrumTable:
    """Ensemble Var(theta_hat)(t) table with reference saturation level.

    source = "full" runs the nonlinear engine from ``params``;
    source = "reduced" integrates the linear system from (rho,
    delta_tilde) taken from ``params`` when not given explicitly.
    Columns: t, var_theta, stderr, v_theta_inf_ref (NaN when delta = 0,
    where no stationary level exists).  The stderr is the Gaussian
    scatter estimate var * sqrt(2/(n-1)).
    """
    if source not in ("full", "reduced"):
        raise ValueError("source must be 'full' or 'reduced'")
    if source == "full":
        if params is None:
            raise ValueError("full-engine runs need params")
        ens = run_theta_ensemble(params, cfg, sample_dt=sample_dt, workers=workers)
        rho = ens.rho
        delta_tilde = params.delta_tilde
    else:
        if params is not None:
            rho = steady_state(params).rho if rho is None else rho
            delta_tilde = params.delta_tilde if delta_tilde is None else delta_tilde
        if rho is None or delta_tilde is None:
            raise ValueError("reduced runs need rho and delta_tilde (or params)")
        if rho <= 0:
            raise BelowThresholdError("reduced runs require rho > 0")
        ens = simulate_reduced_orientation(
            delta_tilde=delta_tilde,
            rho=rho,
            n_traj=cfg.n_traj,
            t_end=cfg.t_sample,
            dt=cfg.dt,
            seed=cfg.seed,
            sample_dt=sample_dt,
            gamma_s=params.gamma_s if params is not None else 1.0,
        )
    var_t = (ens.theta_hat**2).mean(axis=0)
    n = ens.theta_hat.shape[0]
    stderr = var_t * np.sqrt(2.0 / max(n - 1, 1))
    if delta_tilde != 0.0:
        ref = 1.0 / (2.0 * rho * rho * delta_tilde * delta_tilde)
    else:
        ref = np.nan
    # every trajectory starts pinned at the steady state, so Var(0) = 0
    times = np.concatenate([[0.0], ens.times])
    var_t = np.concatenate([[0.0], var_t])
    stderr = np.concatenate([[0.0], stderr])
    data = np.column_stack([times, var_t, stderr, np.full_like(times, ref)])
    return SpectrumTable(
        columns=("t", "var_theta", "stderr", "v_theta_inf_ref"),
        data=data,
        provenance=f"simulated-{source}",
        meta={"rho": rho, "delta_tilde": delta_tilde, "n_traj": n},
    )
