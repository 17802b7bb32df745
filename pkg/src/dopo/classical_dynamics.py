"""Classical (noise-free) OPO dynamics: thresholds, steady states, and a
deterministic integrator used as a stability oracle.

The classical equations follow from the stochastic model by dropping the
noise terms and identifying a+ with conj(a):

    da0/dt = Ep - gamma_p*a0 - chi*(ax^2 + ay^2)/2
    dax/dt = -gamma_s*ax + chi*a0*conj(ax)
    day/dt = -(gamma_s + i*delta)*ay + chi*a0*conj(ay)

Below the x-mode threshold Ep_th_x = gamma_p*gamma_s/chi the signal modes
are off; above it the on-resonance x mode wins the competition (the
detuned y mode has the higher threshold) and the pump clamps to
gamma_s/chi.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .phase_space import PhaseSpaceState

__all__ = [
    "OpoParams",
    "Branch",
    "SteadyState",
    "thresholds",
    "steady_state",
    "classical_rhs",
    "integrate_classical",
    "integrate_classical_batch",
    "ClassicalTrajectory",
]


@dataclass(frozen=True)
class OpoParams:
    """Dynamical parameters of the two-transverse-mode OPO.

    gamma_p and gamma_s are the pump and signal cavity decay rates, chi
    the nonlinear coupling, pump_Ep the (real, nonnegative) pump drive
    amplitude, delta the TEM01 detuning.  The pump phase is absorbed into
    the field definitions, so pump_Ep >= 0 without loss of generality.
    """

    gamma_p: float
    gamma_s: float
    chi: float
    pump_Ep: float
    delta: float = 0.0

    def __post_init__(self):
        if self.gamma_p <= 0 or self.gamma_s <= 0:
            raise ValueError("decay rates must be positive")
        if self.chi <= 0:
            raise ValueError("nonlinear coupling must be positive")
        if self.pump_Ep < 0:
            raise ValueError("pump amplitude must be >= 0")

    @classmethod
    def from_dimensionless(
        cls,
        sigma: float,
        delta_tilde: float = 0.0,
        chi_tilde: float = 1e-3,
        gamma_p_tilde: float = 1.0,
        gamma_s: float = 1.0,
    ) -> "OpoParams":
        """Working convention: time in units of 1/gamma_s.

        sigma is the pump in units of the x-mode threshold; chi_tilde =
        chi/gamma_s is kept small (default 1e-3) so the above-threshold
        photon number rho^2 = 2*(sigma-1)*gamma_p*gamma_s/chi^2 is large
        and linearized results apply.
        """
        gp = gamma_p_tilde * gamma_s
        chi = chi_tilde * gamma_s
        e_th = gp * gamma_s / chi
        return cls(
            gamma_p=gp,
            gamma_s=gamma_s,
            chi=chi,
            pump_Ep=sigma * e_th,
            delta=delta_tilde * gamma_s,
        )

    @property
    def delta_tilde(self) -> float:
        return self.delta / self.gamma_s

    @property
    def threshold_x(self) -> float:
        return self.gamma_p * self.gamma_s / self.chi

    @property
    def sigma(self) -> float:
        """Pump in units of the x-mode threshold."""
        return self.pump_Ep / self.threshold_x


class Branch(enum.Enum):
    BELOW_THRESHOLD = "below-threshold"
    ABOVE_THRESHOLD = "above-threshold"


@dataclass(frozen=True)
class SteadyState:
    """Classical stationary solution (pump, bright mode, dark mode)."""

    alpha0: complex
    alphax: complex
    alphay: complex
    branch: Branch
    rho: float

    def as_phase_space(self) -> PhaseSpaceState:
        return PhaseSpaceState.from_classical(self.alpha0, self.alphax, self.alphay)


def thresholds(params: OpoParams) -> tuple[float, float]:
    """Oscillation thresholds (E_th_x, E_th_y) of the two signal modes.

    E_th_x = gamma_p*gamma_s/chi and E_th_y = sqrt(1 + (delta/gamma_s)^2)
    * E_th_x: detuning raises the y-mode threshold, so E_th_y >= E_th_x
    with equality iff delta = 0.
    """
    e_x = params.threshold_x
    return e_x, math.sqrt(1.0 + params.delta_tilde**2) * e_x


def steady_state(params: OpoParams) -> SteadyState:
    """The unique stable stationary solution.

    Below (or at) the x threshold all signal amplitudes vanish and the
    pump sits at Ep/gamma_p.  Above it the pump clamps to gamma_s/chi,
    the dark mode stays off, and the bright mode takes
    rho = sqrt(2*(Ep - E_th_x)/chi).  The classical equations are
    symmetric under ax -> -ax; the positive branch is reported by
    convention and downstream formulas use rho^2 only.
    """
    e_th = params.threshold_x
    if params.pump_Ep <= e_th:
        return SteadyState(
            alpha0=params.pump_Ep / params.gamma_p,
            alphax=0.0,
            alphay=0.0,
            branch=Branch.BELOW_THRESHOLD,
            rho=0.0,
        )
    rho = math.sqrt(2.0 * (params.pump_Ep - e_th) / params.chi)
    return SteadyState(
        alpha0=params.gamma_s / params.chi,
        alphax=rho,
        alphay=0.0,
        branch=Branch.ABOVE_THRESHOLD,
        rho=rho,
    )


def classical_rhs(params: OpoParams, a0, ax, ay):
    """Noise-free right-hand sides for (a0, ax, ay), with a+ = conj(a).

    Accepts scalars or numpy arrays (vectorized elementwise).
    """
    da0 = params.pump_Ep - params.gamma_p * a0 - 0.5 * params.chi * (ax * ax + ay * ay)
    dax = -params.gamma_s * ax + params.chi * a0 * np.conj(ax)
    day = -(params.gamma_s + 1j * params.delta) * ay + params.chi * a0 * np.conj(ay)
    return da0, dax, day


@dataclass(frozen=True)
class ClassicalTrajectory:
    """Recorded deterministic trajectory; a+ components equal conj(a)."""

    t: np.ndarray
    a0: np.ndarray
    ax: np.ndarray
    ay: np.ndarray

    def state_at(self, k: int) -> PhaseSpaceState:
        return PhaseSpaceState.from_classical(self.a0[k], self.ax[k], self.ay[k])

    def final_state(self) -> PhaseSpaceState:
        return self.state_at(-1)


def _guard_scale(params: OpoParams) -> float:
    """Amplitude scale for the divergence guard.

    Uses the larger of the bright amplitude, the pump amplitude, and 1 so
    the guard stays meaningful below threshold where rho = 0.
    """
    ss = steady_state(params)
    return max(ss.rho, abs(ss.alpha0), 1.0)


def _check_dt(params: OpoParams, dt: float):
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt * params.gamma_s > 1e-2:
        raise ValueError(
            f"dt*gamma_s = {dt * params.gamma_s:.3g} exceeds 1e-2; "
            "reduce the step for a trustworthy deterministic run"
        )


def integrate_classical(
    params: OpoParams,
    init: PhaseSpaceState,
    t_end: float,
    dt: float,
    record_every: int = 1,
) -> ClassicalTrajectory:
    """Fixed-step 4th-order (classical Runge-Kutta) integration.

    Only the (a0, ax, ay) components of ``init`` are used; the conjugate
    partners are pinned to conj(a) as the classical limit requires.
    Raises DivergenceError when any amplitude exceeds 1e6 times the
    natural amplitude scale of the parameter set.
    """
    _check_dt(params, dt)
    n_steps = int(round(t_end / dt))
    y = np.array([[init.a0], [init.ax], [init.ay]], dtype=complex)
    guard = 1e6 * _guard_scale(params)
    n_rec = n_steps // record_every + 1
    t = np.empty(n_rec)
    rec = np.empty((3, n_rec), dtype=complex)
    t[0] = 0.0
    rec[:, 0] = y[:, 0]
    j = 1
    for k in range(1, n_steps + 1):
        y = _rk4_step(params, y, dt)
        if k % 16 == 0 or k == n_steps:
            m = np.max(np.abs(y))
            if not np.isfinite(m) or m > guard:
                raise DivergenceError(
                    f"amplitude {m:.3g} exceeded guard {guard:.3g} at t = {k * dt:.4g}"
                )
        if k % record_every == 0:
            t[j] = k * dt
            rec[:, j] = y[:, 0]
            j += 1
    return ClassicalTrajectory(t=t[:j], a0=rec[0, :j], ax=rec[1, :j], ay=rec[2, :j])


def integrate_classical_batch(
    params: OpoParams, init: np.ndarray, t_end: float, dt: float
) -> np.ndarray:
    """Integrate many initial conditions at once, returning final states.

    ``init`` has shape (3, n) holding (a0, ax, ay) per column.  Used by
    basin-of-attraction checks; no trajectory is recorded.
    """
    _check_dt(params, dt)
    y = np.array(init, dtype=complex)
    if y.ndim != 2 or y.shape[0] != 3:
        raise ValueError("init must have shape (3, n)")
    guard = 1e6 * _guard_scale(params)
    n_steps = int(round(t_end / dt))
    for k in range(1, n_steps + 1):
        y = _rk4_step(params, y, dt)
        if k % 16 == 0 or k == n_steps:
            m = np.max(np.abs(y))
            if not np.isfinite(m) or m > guard:
                raise DivergenceError(
                    f"amplitude {m:.3g} exceeded guard {guard:.3g} at t = {k * dt:.4g}"
                )
    return y


def _rk4_step(params: OpoParams, y: np.ndarray, dt: float) -> np.ndarray:
    def f(z):
        return np.stack(classical_rhs(params, z[0], z[1], z[2]))

    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
