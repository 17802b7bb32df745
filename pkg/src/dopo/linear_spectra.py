"""Linearized dark-mode fluctuations and their quadrature noise spectra.

Above threshold the pump clamps to gamma_s/chi and the dark-mode (TEM01)
fluctuation pair v = (ay, ay+) obeys the linear Langevin system

    dv/dt = L v + sqrt(gamma_s) * (eta_y, eta_y+),

with two independent real unit white noises and

    L = [[-(gamma_s + i*delta),  gamma_s          ],
         [ gamma_s,             -(gamma_s - i*delta)]].

The output noise spectrum of the quadrature X^phi = e^{-i phi} a +
e^{i phi} a+ (vacuum level 1) is computed two independent ways:

* the matrix route, through the spectral covariance
  S(w) = gamma_s * (L + i w I)^-1 (L^T - i w I)^-1, and
* a closed form in the normalized variables Dt = delta/gamma_s,
  wt = w/gamma_s:

      V(wt; phi) = 1 + [4 (Dt^2 - wt^2) + 8 (2 - Dt^2 + wt^2) cos^2 phi]
                       / [4 wt^2 + (Dt^2 - wt^2)^2].

phi = pi/2 is the best-squeezed quadrature globally; its optimum sits at
wt_opt^2 = Dt^2 + 2|Dt| where V_opt = |Dt|/(1 + |Dt|).

Matrix-route convention: the quadrature rotation acts on the real parts
of the covariance entries, S^phi = N * gamma_s * [cos(2 phi) * Re S11 +
Re S12] with the single constant N fixed by the calibration requirement
V -> 0 for the squeezed quadrature of the isotropic cavity at zero noise
frequency (N = 4; see the calibration test).  The full complex
covariance, whose off-axis imaginary part encodes the tilt of the
spectral ellipse, remains available through ``spectral_covariance``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .classical_dynamics import OpoParams
from .errors import SingularityError
from .tables import SpectrumTable

__all__ = [
    "StabilityMatrix",
    "SpectrumMethod",
    "SpectrumPoint",
    "stability_matrix",
    "spectral_covariance",
    "noise_spectrum_matrix",
    "noise_spectrum_closed_form",
    "matrix_route_values",
    "closed_form_values",
    "optimum_squeezing",
    "spectrum_grid",
    "MATRIX_ROUTE_NORMALIZATION",
]

#: Prefactor linking the spectral covariance to the quadrature spectrum.
#: Fixed once by requiring V(Dt=0, wt->0, phi=pi/2) = 0 (perfect squeezing
#: of the isotropic cavity); tests recompute it from that condition.
MATRIX_ROUTE_NORMALIZATION = 4.0


@dataclass(frozen=True)
class StabilityMatrix:
    """Drift matrix of the linearized dark-mode pair (ay, ay+)."""

    entries: np.ndarray
    gamma_s: float
    delta: float

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.entries)


class SpectrumMethod(enum.Enum):
    MATRIX = "analytic-matrix"
    CLOSED_FORM = "analytic-closed-form"
    SIMULATED = "simulated"


@dataclass(frozen=True)
class SpectrumPoint:
    """One (wt, phi, V) sample of a quadrature noise spectrum."""

    omega_tilde: float
    phi: float
    V: float
    method: SpectrumMethod

    def __post_init__(self):
        if self.method is not SpectrumMethod.SIMULATED and self.V < 0.0:
            # analytic spectra are variances; tiny negative round-off only
            if self.V < -1e-9:
                raise ValueError(f"analytic spectrum value {self.V} is negative")
            object.__setattr__(self, "V", 0.0)


def stability_matrix(params: OpoParams) -> StabilityMatrix:
    """Drift matrix of the dark-mode fluctuations for the clamped pump.

    Diagonal -(gamma_s +/- i*delta), off-diagonals gamma_s; independent
    of pump strength and coupling because chi*alpha0_clamped = gamma_s.
    Eigenvalues -gamma_s +/- sqrt(gamma_s^2 - delta^2) never have
    positive real part; delta = 0 leaves the marginal orientation mode.
    """
    gs, d = params.gamma_s, params.delta
    entries = np.array(
        [[-(gs + 1j * d), gs], [gs, -(gs - 1j * d)]], dtype=complex
    )
    return StabilityMatrix(entries=entries, gamma_s=gs, delta=d)


def _covariance_batch(mat: StabilityMatrix, omegas: np.ndarray) -> np.ndarray:
    """S(w) = gamma_s (L + iwI)^-1 (L^T - iwI)^-1 for an array of w.

    Returns shape (n, 2, 2).  Uses the 2x2 adjugate inverse; the two
    determinants are complex conjugates, so the common denominator is
    |det|^2, real and nonnegative, vanishing only at (delta=0, w=0).
    """
    L = mat.entries
    a, b = L[0, 0], L[0, 1]
    c, d = L[1, 0], L[1, 1]
    w = np.asarray(omegas, dtype=float)
    iw = 1j * w
    det1 = (a + iw) * (d + iw) - b * c
    det2 = (a - iw) * (d - iw) - b * c
    den = (det1 * det2).real  # |det|^2 up to round-off
    if np.any(den <= 0.0):
        raise SingularityError(
            "spectral covariance is singular at delta = 0, omega = 0"
        )
    # adj(L + iwI) = [[d+iw, -b], [-c, a+iw]]; transpose of L swaps b and c
    inv1 = np.empty(w.shape + (2, 2), dtype=complex)
    inv1[..., 0, 0] = d + iw
    inv1[..., 0, 1] = -b
    inv1[..., 1, 0] = -c
    inv1[..., 1, 1] = a + iw
    inv2 = np.empty_like(inv1)
    inv2[..., 0, 0] = d - iw
    inv2[..., 0, 1] = -c
    inv2[..., 1, 0] = -b
    inv2[..., 1, 1] = a - iw
    out = np.einsum("...ij,...jk->...ik", inv1, inv2)
    out *= (mat.gamma_s / den)[..., None, None]
    return out


def spectral_covariance(mat: StabilityMatrix, omega: float) -> np.ndarray:
    """Spectral covariance matrix S(omega) of the dark-mode pair.

    S12 is real, S22 = conj(S11), and S decays as 1/omega^2.  Raises
    SingularityError at the perfect-squeezing pole (delta = 0,
    omega = 0); callers should treat that point as a limit.
    """
    return _covariance_batch(mat, np.asarray(float(omega)))


def matrix_route_values(params: OpoParams, omega_tilde, phi) -> np.ndarray:
    """Vectorized matrix-route V over arrays of wt (phi broadcastable)."""
    mat = stability_matrix(params)
    wt = np.asarray(omega_tilde, dtype=float)
    phi_arr = np.asarray(phi, dtype=float)
    wt_b, phi_b = np.broadcast_arrays(wt, phi_arr)
    cov = _covariance_batch(mat, wt_b * params.gamma_s)
    s_phi = MATRIX_ROUTE_NORMALIZATION * params.gamma_s * (
        np.cos(2.0 * phi_b) * cov[..., 0, 0].real + cov[..., 0, 1].real
    )
    return 1.0 + s_phi


def closed_form_values(delta_tilde: float, omega_tilde, phi) -> np.ndarray:
    """Vectorized closed-form V over arrays of wt (phi broadcastable)."""
    wt = np.asarray(omega_tilde, dtype=float)
    phi_arr = np.asarray(phi, dtype=float)
    wt_b, phi_b = np.broadcast_arrays(wt, phi_arr)
    d2 = delta_tilde * delta_tilde
    diff = d2 - wt_b * wt_b
    den = 4.0 * wt_b * wt_b + diff * diff
    if np.any(den == 0.0):
        raise SingularityError(
            "closed-form spectrum is singular at delta = 0, omega = 0"
        )
    num = 4.0 * diff + 8.0 * (2.0 - d2 + wt_b * wt_b) * np.cos(phi_b) ** 2
    return 1.0 + num / den


def noise_spectrum_matrix(params: OpoParams, omega_tilde: float, phi: float) -> SpectrumPoint:
    """Quadrature noise spectrum through the spectral-covariance route.

    Reproduces the closed form at every (Dt, wt, phi).  The pole of the
    isotropic cavity at wt = 0 is returned as its limit V = 0 for the
    squeezed quadrature (cos phi = 0) and raises SingularityError for any
    other quadrature.
    """
    try:
        v = float(matrix_route_values(params, float(omega_tilde), float(phi)))
    except SingularityError:
        if math.cos(phi) ** 2 < 1e-30:
            v = 0.0
        else:
            raise
    return SpectrumPoint(
        omega_tilde=float(omega_tilde), phi=float(phi), V=v, method=SpectrumMethod.MATRIX
    )


def noise_spectrum_closed_form(
    delta_tilde: float, omega_tilde: float, phi: float
) -> SpectrumPoint:
    """Closed-form quadrature noise spectrum (vacuum level 1).

    V = 1 + [4(Dt^2 - wt^2) + 8(2 - Dt^2 + wt^2) cos^2 phi] /
            [4 wt^2 + (Dt^2 - wt^2)^2]

    At the isotropic pole (Dt = 0, wt = 0) the squeezed quadrature is
    returned as its finite limit V = 0; other quadratures raise
    SingularityError (the antisqueezed divergence).
    """
    try:
        v = float(closed_form_values(float(delta_tilde), float(omega_tilde), float(phi)))
    except SingularityError:
        if math.cos(phi) ** 2 < 1e-30:
            v = 0.0
        else:
            raise
    return SpectrumPoint(
        omega_tilde=float(omega_tilde),
        phi=float(phi),
        V=v,
        method=SpectrumMethod.CLOSED_FORM,
    )


def optimum_squeezing(delta_tilde: float) -> tuple[float, float]:
    """Optimum detection frequency and noise floor of the pi/2 quadrature.

    wt_opt^2 = Dt^2 + 2|Dt| and V_opt = |Dt|/(1 + |Dt|), monotonically
    increasing in |Dt| and confined to [0, 1).
    """
    ad = abs(delta_tilde)
    return math.sqrt(ad * ad + 2.0 * ad), ad / (1.0 + ad)


def spectrum_grid(params: OpoParams, omega_range, phi_list) -> SpectrumTable:
    """Evaluate both routes over a (wt, phi) grid as a CSV-ready table.

    Columns: omega_tilde, phi_rad, V_matrix, V_closed.  Grid points that
    sit exactly on the spectral pole are excluded (tables stay finite; no
    infinities are emitted).
    """
    omegas = np.atleast_1d(np.asarray(omega_range, dtype=float))
    phis = np.atleast_1d(np.asarray(phi_list, dtype=float))
    if omegas.size == 0 or phis.size == 0:
        raise ValueError("spectrum grid must be non-empty")
    rows = []
    for phi in phis:
        for wt in omegas:
            try:
                vm = noise_spectrum_matrix(params, wt, phi).V
                vc = noise_spectrum_closed_form(params.delta_tilde, wt, phi).V
            except SingularityError:
                continue
            rows.append((wt, phi, vm, vc))
    if not rows:
        raise SingularityError("every requested grid point is singular")
    return SpectrumTable(
        columns=("omega_tilde", "phi_rad", "V_matrix", "V_closed"),
        data=np.array(rows, dtype=float),
        provenance="analytic-matrix, analytic-closed-form",
        meta={"delta_tilde": params.delta_tilde},
    )
