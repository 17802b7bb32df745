"""Positive-P stochastic simulation of the full nonlinear three-mode OPO.

The intracavity dynamics is integrated as six coupled complex Langevin
equations for the independent amplitude pairs (a0, a0+), (ax, ax+),
(ay, ay+):

    da0/dt  = Ep - gamma_p a0  - chi (ax^2  + ay^2 )/2
    dax/dt  = -gamma_s ax            + chi a0  ax+ + sqrt(chi a0)  eta_x
    day/dt  = -(gamma_s + i delta)ay + chi a0  ay+ + sqrt(chi a0)  eta_y

plus the partner equations with a <-> a+, eta -> eta+, i -> -i.  The
pump equations carry no noise.  The four noises eta_x, eta_x+, eta_y,
eta_y+ are real, Gaussian, mutually independent, and delta-correlated
with unit strength.

Interpretation is Ito; the noise amplitudes depend only on the pump
amplitudes, which are themselves noiseless, so the Ito and Stratonovich
readings coincide and the optional drift-implicit midpoint scheme needs
no correction term.  The complex square root uses the principal branch;
along healthy trajectories a0 stays near the positive real clamp value
gamma_s/chi, far from the cut, and excursions into Re(a0) < 0 are
counted as a diagnostic.

Each trajectory owns a counter-based random stream keyed by
(seed, trajectory index), so ensembles are reproducible bit for bit for
any chunking and any number of worker processes.  Diverged trajectories
are excluded from averages, logged, and the run hard-fails if they
exceed 1% of the ensemble.

Quadrature spectra are estimated per trajectory from Hann-windowed,
half-overlapping segments (Welch averaging) of the recorded amplitude
series: the two-sided transform products F(w) F(-w) of the stochastic
quadrature X^phi = e^{-i phi} a + e^{i phi} a+ are formed without
complex conjugation (a+ is not conj(a) along trajectories), scaled by
twice the signal decay rate, and offset by the vacuum unit.  Plain
rectangular segments leak the large antisqueezing peak at zero frequency
into the whole band; the Hann window confines that bias to the lowest
two or three bins.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classical_dynamics import OpoParams, steady_state
from .errors import (
    BelowThresholdError,
    DivergenceBudgetError,
    InsufficientData,
    StepSizeWarning,
    TrajectoryDiverged,
)
from .linear_spectra import closed_form_values
from .phase_space import PhaseSpaceState
from .tables import SpectrumTable

__all__ = [
    "SdeConfig",
    "NoiseAmplitudes",
    "TrajectorySeries",
    "EnsembleResult",
    "ThetaEnsemble",
    "drift_and_noise",
    "integrate_trajectory",
    "run_spectral_ensemble",
    "run_theta_ensemble",
    "estimate_noise_spectrum",
]

SCHEMES = ("euler-maruyama", "semi-implicit-midpoint")

#: Trajectories integrated per vectorized pass.  Results do not depend on
#: this value (streams are per trajectory and all state operations
#: elementwise); it bounds memory and sets the work-unit size for workers.
_CHUNK = 256

_DIVERGENCE_BUDGET = 0.01
_GUARD_EVERY = 16
_NOISE_BLOCK = 2048


@dataclass(frozen=True)
class SdeConfig:
    """Ensemble integration settings (times in the caller's time unit)."""

    dt: float
    t_burn: float
    t_sample: float
    n_traj: int
    seed: int
    divergence_threshold: float | None = None
    scheme: str = "euler-maruyama"

    def __post_init__(self):
        if self.dt <= 0 or self.t_burn <= 0 or self.t_sample <= 0:
            raise ValueError("dt, t_burn and t_sample must be positive")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if self.divergence_threshold is not None and self.divergence_threshold <= 0:
            raise ValueError("divergence_threshold must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


@dataclass(frozen=True)
class NoiseAmplitudes:
    """Complex amplitude multiplying each real unit noise channel."""

    ax: complex
    axp: complex
    ay: complex
    ayp: complex


def _params_tuple(params: OpoParams):
    return (params.pump_Ep, params.gamma_p, params.gamma_s, params.chi, params.delta)


def _drift_amp(st, p):
    a0, a0p, ax, axp, ay, ayp = st
    Ep, gp, gs, chi, delta = p
    ca0 = chi * a0
    ca0p = chi * a0p
    d0 = Ep - gp * a0 - 0.5 * chi * (ax * ax + ay * ay)
    d0p = Ep - gp * a0p - 0.5 * chi * (axp * axp + ayp * ayp)
    dx = -gs * ax + ca0 * axp
    dxp = -gs * axp + ca0p * ax
    dy = -(gs + 1j * delta) * ay + ca0 * ayp
    dyp = -(gs - 1j * delta) * ayp + ca0p * ay
    return (d0, d0p, dx, dxp, dy, dyp), (np.sqrt(ca0), np.sqrt(ca0p))


def _apply(st, drift, amps, w, dt, sqdt):
    g, gpp = amps
    d0, d0p, dx, dxp, dy, dyp = drift
    a0, a0p, ax, axp, ay, ayp = st
    return (
        a0 + dt * d0,
        a0p + dt * d0p,
        ax + dt * dx + sqdt * g * w[0],
        axp + dt * dxp + sqdt * gpp * w[1],
        ay + dt * dy + sqdt * g * w[2],
        ayp + dt * dyp + sqdt * gpp * w[3],
    )


def _step(st, w, p, dt, sqdt, scheme):
    if scheme == "euler-maruyama":
        drift, amps = _drift_amp(st, p)
        return _apply(st, drift, amps, w, dt, sqdt)
    new = st
    for _ in range(3):  # drift-implicit midpoint, fixed-point iterated
        mid = tuple(0.5 * (s + n) for s, n in zip(st, new))
        drift, amps = _drift_amp(mid, p)
        new = _apply(st, drift, amps, w, dt, sqdt)
    return new


def drift_and_noise(
    state: PhaseSpaceState, params: OpoParams
) -> tuple[PhaseSpaceState, NoiseAmplitudes]:
    """Deterministic drift and per-channel noise amplitudes at a state.

    The noise channels are ordered (eta_x, eta_x+, eta_y, eta_y+); the x
    and y channels share the amplitude sqrt(chi*a0), the partner channels
    share sqrt(chi*a0+).  The pump components carry no noise.
    """
    st = tuple(np.asarray(v, dtype=complex) for v in state.as_array())
    drift, (g, gpp) = _drift_amp(st, _params_tuple(params))
    return (
        PhaseSpaceState(*(complex(d) for d in drift)),
        NoiseAmplitudes(ax=complex(g), axp=complex(gpp), ay=complex(g), ayp=complex(gpp)),
    )


def _rng_for(seed: int, traj_index: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, trajectory index)."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(traj_index,)))
    )


def _divergence_threshold(params: OpoParams, cfg: SdeConfig) -> float:
    if cfg.divergence_threshold is not None:
        return cfg.divergence_threshold
    ss = steady_state(params)
    return 1e6 * max(ss.rho, abs(ss.alpha0), 1.0)


def _warn_dt(params: OpoParams, cfg: SdeConfig):
    if cfg.dt * params.gamma_s > 1e-3:
        warnings.warn(
            f"dt*gamma_s = {cfg.dt * params.gamma_s:.3g} above the recommended 1e-3; "
            "weak discretization bias may be visible in tight spectral tests",
            StepSizeWarning,
            stacklevel=3,
        )


def _simulate_chunk(params, cfg, indices, stride, nsamp, record, burn_steps=None):
    """Integrate one chunk of trajectories, all state updates elementwise.

    record is a set drawn from {"xy", "w", "full"}.  The j-th sample is
    taken at step burn_steps + (j+1)*stride.  Returns (recorded arrays,
    alive mask, divergence log [(traj_index, step)], branch-cut count).
    Diverged trajectories are reset to the initial state and flagged;
    their columns are excluded from every average downstream.
    """
    p = _params_tuple(params)
    n = len(indices)
    ss = steady_state(params).as_phase_space().as_array()
    st = tuple(np.full(n, ss[i], dtype=complex) for i in range(6))
    init = tuple(s.copy() for s in st)
    dt, sqdt = cfg.dt, np.sqrt(cfg.dt)
    if burn_steps is None:
        burn_steps = int(round(cfg.t_burn / cfg.dt))
    n_steps = burn_steps + nsamp * stride
    rngs = [_rng_for(cfg.seed, int(i)) for i in indices]
    alive = np.ones(n, dtype=bool)
    diverged: list[tuple[int, int]] = []
    thr = _divergence_threshold(params, cfg)
    branch_cut = 0

    out = {}
    if "xy" in record:
        for key in ("ax", "axp", "ay", "ayp"):
            out[key] = np.empty((n, nsamp), dtype=complex)
    if "w" in record:
        out["w"] = np.empty((n, nsamp), dtype=complex)
        out["ax_sum"] = np.zeros(n, dtype=complex)
    if "full" in record:
        out["full"] = np.empty((6, n, nsamp), dtype=complex)
        out["full_t"] = np.empty(nsamp)

    k = 0
    while k < n_steps:
        b = min(_NOISE_BLOCK, n_steps - k)
        noise = np.empty((b, 4, n))
        for i, rng in enumerate(rngs):
            noise[:, :, i] = rng.standard_normal((b, 4))
        for q in range(b):
            st = _step(st, noise[q], p, dt, sqdt, cfg.scheme)
            step = k + q + 1
            if step % _GUARD_EVERY == 0 or step == n_steps:
                stacked = np.abs(np.stack(st))
                bad = np.any(~np.isfinite(stacked) | (stacked > thr), axis=0)
                new_bad = bad & alive
                if np.any(new_bad):
                    for i in np.nonzero(new_bad)[0]:
                        diverged.append((int(indices[i]), step))
                        for comp, val in zip(st, init):
                            comp[i] = val[i]
                    alive &= ~bad
                branch_cut += int(np.count_nonzero(st[0].real < 0))
            if step > burn_steps and (step - burn_steps) % stride == 0:
                j = (step - burn_steps) // stride - 1
                if j < nsamp:
                    if "xy" in record:
                        out["ax"][:, j] = st[2]
                        out["axp"][:, j] = st[3]
                        out["ay"][:, j] = st[4]
                        out["ayp"][:, j] = st[5]
                    if "w" in record:
                        out["w"][:, j] = st[4] + st[5]
                        out["ax_sum"] += st[2]
                    if "full" in record:
                        out["full"][:, :, j] = np.stack(st)
                        out["full_t"][j] = step * dt
        k += b
    if "w" in record:
        out["ax_mean"] = out.pop("ax_sum") / nsamp
    return out, alive, diverged, branch_cut


@dataclass(frozen=True)
class TrajectorySeries:
    """Sampled six-component series of a single stochastic trajectory."""

    times: np.ndarray
    data: np.ndarray  # (6, n_samples) complex, component order as PhaseSpaceState
    traj_index: int

    @property
    def a0(self):
        return self.data[0]

    @property
    def a0p(self):
        return self.data[1]

    @property
    def ax(self):
        return self.data[2]

    @property
    def axp(self):
        return self.data[3]

    @property
    def ay(self):
        return self.data[4]

    @property
    def ayp(self):
        return self.data[5]

    def state_at(self, k: int) -> PhaseSpaceState:
        return PhaseSpaceState.from_array(self.data[:, k])


def integrate_trajectory(
    params: OpoParams, cfg: SdeConfig, traj_index: int, record_stride: int = 1
) -> TrajectorySeries:
    """Integrate one trajectory, recording every ``record_stride`` steps.

    Starts from the classical steady state (positive branch) with zero
    fluctuation; recording covers burn-in plus the sampling window.
    Deterministic given (cfg.seed, traj_index) and bit-identical to the
    same trajectory inside any ensemble.  Raises TrajectoryDiverged if
    the divergence guard trips.
    """
    _warn_dt(params, cfg)
    total_steps = int(round((cfg.t_burn + cfg.t_sample) / cfg.dt))
    nsamp = total_steps // record_stride
    out, alive, diverged, _ = _simulate_chunk(
        params,
        cfg,
        np.array([traj_index]),
        record_stride,
        nsamp,
        {"full"},
        burn_steps=0,
    )
    if diverged:
        raise TrajectoryDiverged(
            f"trajectory {traj_index} crossed the divergence threshold "
            f"at step {diverged[0][1]}"
        )
    return TrajectorySeries(
        times=out["full_t"], data=out["full"][:, 0, :], traj_index=traj_index
    )


@dataclass
class EnsembleResult:
    """Per-trajectory spectral products and bookkeeping for one ensemble.

    ``products`` maps mode ("x" or "y") to an array of shape
    (n_ok, 4, n_bins) holding the Welch-averaged two-sided transform
    products (F_a F_a, F_a F_a+, F_a+ F_a, F_a+ F_a+) evaluated at
    (omega, -omega) pairs, from which the quadrature spectrum at any
    angle follows linearly.  Diverged trajectories are excluded.
    """

    params: OpoParams
    cfg: SdeConfig
    omega_tilde: np.ndarray
    products: dict
    traj_indices: np.ndarray
    mean_ax: np.ndarray
    mean_ay: np.ndarray
    n_diverged: int
    diverged_seeds: list
    branch_cut_samples: int
    n_windows: int
    sample_dt: float
    spectra: SpectrumTable | None = None
    theta_series_stats: dict | None = field(default=None)

    @property
    def n_traj(self) -> int:
        return self.cfg.n_traj

    @property
    def n_ok(self) -> int:
        return len(self.traj_indices)


def _chunk_ranges(n_traj: int):
    return [(lo, min(lo + _CHUNK, n_traj)) for lo in range(0, n_traj, _CHUNK)]


def _welch_products(
    rec_a, rec_p, sample_dt, n_segments, window, overlap, keep_bins, subtract_mean
):
    """Segment-averaged two-sided transform products per trajectory.

    Returns (n_traj, 4, keep_bins) complex: products F_a(w)F_a(-w),
    F_a(w)F_p(-w), F_p(w)F_a(-w), F_p(w)F_p(-w), each normalized by the
    window power so their combination estimates the two-sided spectral
    density of the corresponding quadrature correlation.
    """
    n_traj, nsamp = rec_a.shape
    seg_len = nsamp // n_segments
    if seg_len < 2:
        raise InsufficientData("segments too short for spectral estimation")
    step = seg_len // 2 if overlap else seg_len
    starts = list(range(0, nsamp - seg_len + 1, step))
    if window == "hann":
        win = np.hanning(seg_len)
    elif window == "rect":
        win = np.ones(seg_len)
    else:
        raise ValueError(f"unknown window {window!r}")
    norm = (win**2).sum() * sample_dt  # window power normalization
    keep = min(keep_bins, seg_len // 2)
    j = np.arange(keep)
    jneg = (-j) % seg_len
    prods = np.zeros((n_traj, 4, keep), dtype=complex)
    for i in range(n_traj):
        xa = rec_a[i]
        xp = rec_p[i]
        if subtract_mean:
            xa = xa - xa.mean()
            xp = xp - xp.mean()
        for s0 in starts:
            fa = np.fft.fft(xa[s0 : s0 + seg_len] * win) * sample_dt
            fp = np.fft.fft(xp[s0 : s0 + seg_len] * win) * sample_dt
            prods[i, 0] += fa[j] * fa[jneg]
            prods[i, 1] += fa[j] * fp[jneg]
            prods[i, 2] += fp[j] * fa[jneg]
            prods[i, 3] += fp[j] * fp[jneg]
    prods /= len(starts) * norm
    return prods


def _spectral_chunk(args):
    params, cfg, lo, hi, stride, nsamp, n_segments, window, overlap, keep_bins = args
    indices = np.arange(lo, hi)
    out, alive, diverged, branch_cut = _simulate_chunk(
        params, cfg, indices, stride, nsamp, {"xy"}
    )
    sample_dt = cfg.dt * stride
    # dark mode: the stationary mean vanishes identically, so no sample
    # mean is removed (removing one distorts the lowest bins); the bright
    # mode carries the +/-rho carrier, removed per trajectory.
    prod_y = _welch_products(
        out["ay"], out["ayp"], sample_dt, n_segments, window, overlap, keep_bins,
        subtract_mean=False,
    )
    prod_x = _welch_products(
        out["ax"], out["axp"], sample_dt, n_segments, window, overlap, keep_bins,
        subtract_mean=True,
    )
    return (
        lo,
        prod_y,
        prod_x,
        out["ax"].mean(axis=1),
        out["ay"].mean(axis=1),
        alive,
        diverged,
        branch_cut,
    )


def run_spectral_ensemble(
    params: OpoParams,
    cfg: SdeConfig,
    sample_dt: float | None = None,
    n_segments: int = 4,
    window: str = "hann",
    overlap: bool = True,
    keep_bins: int = 256,
    workers: int = 1,
) -> EnsembleResult:
    """Integrate an ensemble and collect per-trajectory spectral products.

    The result is a pure function of (params, cfg) and the estimator
    settings; ``workers`` only distributes fixed-size trajectory chunks
    over processes and cannot change any output bit.  Hard-fails with
    DivergenceBudgetError when more than 1% of trajectories diverge.
    """
    _warn_dt(params, cfg)
    if sample_dt is None:
        sample_dt = 50.0 * cfg.dt
    stride = max(1, int(round(sample_dt / cfg.dt)))
    sample_dt = stride * cfg.dt
    nsamp = int(round(cfg.t_sample / sample_dt))
    if nsamp // max(1, n_segments) < 2:
        raise InsufficientData("t_sample too short for the requested segmentation")

    jobs = [
        (params, cfg, lo, hi, stride, nsamp, n_segments, window, overlap, keep_bins)
        for lo, hi in _chunk_ranges(cfg.n_traj)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_spectral_chunk, jobs))
    else:
        results = [_spectral_chunk(j) for j in jobs]
    results.sort(key=lambda r: r[0])  # fixed reduction order

    prod_y, prod_x, mean_ax, mean_ay, alive_all = [], [], [], [], []
    diverged: list = []
    branch_cut = 0
    for lo, py, px, m_ax, m_ay, alive, div, bc in results:
        prod_y.append(py)
        prod_x.append(px)
        mean_ax.append(m_ax)
        mean_ay.append(m_ay)
        alive_all.append(alive)
        diverged.extend(div)
        branch_cut += bc
    alive = np.concatenate(alive_all)
    n_div = int(np.count_nonzero(~alive))
    if n_div > _DIVERGENCE_BUDGET * cfg.n_traj:
        raise DivergenceBudgetError(
            f"{n_div}/{cfg.n_traj} trajectories diverged (> {_DIVERGENCE_BUDGET:.0%}); "
            f"first events: {sorted(diverged)[:5]}"
        )
    seg_len = nsamp // n_segments
    keep = min(keep_bins, seg_len // 2)
    omega = 2.0 * np.pi * np.arange(keep) / (seg_len * sample_dt)
    n_windows = (2 * n_segments - 1) if overlap else n_segments
    return EnsembleResult(
        params=params,
        cfg=cfg,
        omega_tilde=omega / params.gamma_s,
        products={
            "y": np.concatenate(prod_y)[alive],
            "x": np.concatenate(prod_x)[alive],
        },
        traj_indices=np.nonzero(alive)[0],
        mean_ax=np.concatenate(mean_ax)[alive],
        mean_ay=np.concatenate(mean_ay)[alive],
        n_diverged=n_div,
        diverged_seeds=sorted(diverged),
        branch_cut_samples=branch_cut,
        n_windows=n_windows,
        sample_dt=sample_dt,
    )


def estimate_noise_spectrum(
    ensemble: EnsembleResult,
    mode: str = "y",
    phi: float = np.pi / 2,
    min_omega_tilde: float | None = None,
    max_omega_tilde: float | None = None,
) -> SpectrumTable:
    """Simulated quadrature noise spectrum with statistical errors.

    Combines the stored transform products into the spectrum of
    X^phi = e^{-i phi} a + e^{i phi} a+ per trajectory, then averages
    across trajectories: V_hat is the real part, V_stderr the
    across-trajectory scatter, V_imag_abs the magnitude of the residual
    imaginary part (a consistency diagnostic, zero in distribution), and
    V_closed_ref the linearized dark-mode reference (NaN for mode x,
    whose analytic spectrum is out of scope here).  Raises
    InsufficientData when fewer than 8 usable windows remain.
    """
    if mode not in ("x", "y"):
        raise ValueError("mode must be 'x' or 'y'")
    prods = ensemble.products[mode]
    n_ok = prods.shape[0]
    if n_ok * ensemble.n_windows < 8:
        raise InsufficientData(f"only {n_ok * ensemble.n_windows} usable segments (< 8)")
    gs = ensemble.params.gamma_s
    s_traj = (
        np.exp(-2j * phi) * prods[:, 0]
        + prods[:, 1]
        + prods[:, 2]
        + np.exp(2j * phi) * prods[:, 3]
    )
    v_traj = 1.0 + 2.0 * gs * s_traj
    v_hat = v_traj.real.mean(axis=0)
    v_err = v_traj.real.std(axis=0, ddof=1) / np.sqrt(n_ok)
    v_imag = np.abs(v_traj.imag.mean(axis=0))
    omega = ensemble.omega_tilde
    ref = np.full_like(omega, np.nan)
    if mode == "y":
        dt_ = ensemble.params.delta_tilde
        diff = dt_ * dt_ - omega * omega
        ok = (4.0 * omega * omega + diff * diff) > 0.0
        ref[ok] = closed_form_values(dt_, omega[ok], phi)
    sel = np.ones_like(omega, dtype=bool)
    if min_omega_tilde is not None:
        sel &= omega >= min_omega_tilde - 1e-12
    if max_omega_tilde is not None:
        sel &= omega <= max_omega_tilde + 1e-12
    data = np.column_stack(
        [omega[sel], np.full(int(sel.sum()), phi), v_hat[sel], v_err[sel], v_imag[sel], ref[sel]]
    )
    return SpectrumTable(
        columns=("omega_tilde", "phi_rad", "V_hat", "V_stderr", "V_imag_abs", "V_closed_ref"),
        data=data,
        provenance="simulated",
        meta={
            "mode": mode,
            "n_ok": n_ok,
            "n_windows": ensemble.n_windows,
            "n_diverged": ensemble.n_diverged,
        },
    )


@dataclass
class ThetaEnsemble:
    """Sampled dark-mode sum w = (ay + ay+)/(2 rho) for an ensemble.

    theta_hat = Re w estimates the bright-mode orientation; Im w is the
    gauge/consistency residual.
    """

    times: np.ndarray
    w: np.ndarray  # (n_ok, n_samples) complex
    rho: float
    mean_ax: np.ndarray
    traj_indices: np.ndarray
    n_diverged: int
    diverged_seeds: list

    @property
    def theta_hat(self) -> np.ndarray:
        return self.w.real

    @property
    def imag_residual(self) -> np.ndarray:
        return self.w.imag


def _theta_chunk(args):
    params, cfg, lo, hi, stride, nsamp = args
    indices = np.arange(lo, hi)
    out, alive, diverged, _ = _simulate_chunk(params, cfg, indices, stride, nsamp, {"w"})
    return lo, out["w"], out["ax_mean"], alive, diverged


def run_theta_ensemble(
    params: OpoParams,
    cfg: SdeConfig,
    sample_dt: float | None = None,
    workers: int = 1,
) -> ThetaEnsemble:
    """Integrate an ensemble recording the orientation estimator series.

    Sampling starts right after burn-in (use a t_burn of one step to
    watch variance grow from the deterministic start).  Deterministic
    for any worker count, like the spectral runner.
    """
    ss = steady_state(params)
    if ss.rho == 0.0:
        raise BelowThresholdError("orientation requires an above-threshold bright mode")
    _warn_dt(params, cfg)
    if sample_dt is None:
        sample_dt = 100.0 * cfg.dt
    stride = max(1, int(round(sample_dt / cfg.dt)))
    sample_dt = stride * cfg.dt
    nsamp = int(round(cfg.t_sample / sample_dt))
    if nsamp < 1:
        raise ValueError("t_sample shorter than one sampling interval")

    jobs = [(params, cfg, lo, hi, stride, nsamp) for lo, hi in _chunk_ranges(cfg.n_traj)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_theta_chunk, jobs))
    else:
        results = [_theta_chunk(j) for j in jobs]
    results.sort(key=lambda r: r[0])

    w_all, mean_ax, alive_all = [], [], []
    diverged: list = []
    for lo, w, m_ax, alive, div in results:
        w_all.append(w)
        mean_ax.append(m_ax)
        alive_all.append(alive)
        diverged.extend(div)
    alive = np.concatenate(alive_all)
    n_div = int(np.count_nonzero(~alive))
    if n_div > _DIVERGENCE_BUDGET * cfg.n_traj:
        raise DivergenceBudgetError(
            f"{n_div}/{cfg.n_traj} trajectories diverged (> {_DIVERGENCE_BUDGET:.0%})"
        )
    burn_steps = int(round(cfg.t_burn / cfg.dt))
    times = (burn_steps + stride * (1 + np.arange(nsamp))) * cfg.dt
    return ThetaEnsemble(
        times=times,
        w=np.concatenate(w_all)[alive] / (2.0 * ss.rho),
        rho=ss.rho,
        mean_ax=np.concatenate(mean_ax)[alive],
        traj_indices=np.nonzero(alive)[0],
        n_diverged=n_div,
        diverged_seeds=sorted(diverged),
    )
