"""Transverse cavity geometry and the TEM10/TEM01 mode detuning.

A two-mirror linear cavity with an intracavity nonlinear crystal supports
Hermite-Gauss TEM_mn modes whose resonance comb is set by the round-trip
g-parameters.  Two kinds of transverse anisotropy make the x and y
directions inequivalent and split the first transverse-mode family:

* a tilt of the crystal by an angle beta in the zx plane, which gives the
  cavity different effective lengths along x and y, and
* an astigmatism of mirror 2, modelled by different curvature radii R2x
  and R2y (ellipticity eps = 1 - R2y/R2x).

This module computes the effective lengths, the optical length, the four
g-parameters, TEM_mn resonance frequencies, the TEM01 - TEM10 detuning
(exact and to leading order in the anisotropy), the output-coupling decay
rate of the signal modes, and the largest tilt/ellipticity compatible
with a squeezing target.

Conventions: angles are radians; lengths carry whatever unit the caller
uses, with the speed of light configurable for unit freedom; the detuning
is signed, positive when the TEM01 (y) resonance lies above the TEM10 (x)
resonance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

from .errors import ExpansionValidityWarning, NoBracketError, StabilityError

__all__ = [
    "CrystalSpec",
    "MirrorSpec",
    "CavityGeometry",
    "ModeIndex",
    "effective_lengths",
    "optical_length",
    "g_parameters",
    "resonance_frequency",
    "signal_decay_rate",
    "detuning",
    "detuning_normalized",
    "detuning_small_anisotropy",
    "anisotropy_tolerance",
    "with_anisotropy",
    "typical_geometry",
    "geometry_from_config",
]


@dataclass(frozen=True)
class CrystalSpec:
    """Nonlinear crystal (or an equivalent tilted dielectric slab).

    length_lc uses the same unit as the cavity length; tilt_beta is the
    tilt angle in the zx plane, in radians.
    """

    length_lc: float
    refractive_index_nc: float
    tilt_beta: float = 0.0

    def __post_init__(self):
        if self.length_lc < 0:
            raise ValueError(f"crystal length must be >= 0, got {self.length_lc}")
        if self.refractive_index_nc <= 1:
            raise ValueError(
                f"refractive index must exceed 1, got {self.refractive_index_nc}"
            )
        if abs(self.tilt_beta) >= math.pi / 2:
            raise ValueError(
                f"|tilt| must be below pi/2 rad, got {self.tilt_beta}"
            )


@dataclass(frozen=True)
class MirrorSpec:
    """Concave mirror, possibly astigmatic (different x and y curvature radii)."""

    radius_x: float
    radius_y: float

    def __post_init__(self):
        if self.radius_x <= 0 or self.radius_y <= 0:
            raise ValueError(
                f"mirror radii must be positive, got ({self.radius_x}, {self.radius_y})"
            )

    @classmethod
    def spherical(cls, radius: float) -> "MirrorSpec":
        return cls(radius_x=radius, radius_y=radius)

    @property
    def ellipticity(self) -> float:
        """eps = 1 - radius_y/radius_x; zero for a spherical mirror."""
        return 1.0 - self.radius_y / self.radius_x

    @property
    def is_spherical(self) -> bool:
        return self.radius_x == self.radius_y


@dataclass(frozen=True)
class CavityGeometry:
    """Physical description of the OPO cavity.

    Mirror 1 is spherical; mirror 2 carries any astigmatism.  The
    transmissivity refers to the output-coupling mirror at the signal
    frequency.  speed_of_light is configurable so any consistent unit
    system can be used (default 1).
    """

    length_L: float
    mirror1: MirrorSpec
    mirror2: MirrorSpec
    crystal: CrystalSpec
    transmissivity_T: float
    speed_of_light_c: float = 1.0

    def __post_init__(self):
        if self.length_L <= 0:
            raise ValueError(f"cavity length must be positive, got {self.length_L}")
        if not self.mirror1.is_spherical:
            raise ValueError("mirror 1 must be spherical; put astigmatism on mirror 2")
        if not 0.0 < self.transmissivity_T < 1.0:
            raise ValueError(
                f"transmissivity must lie in (0, 1), got {self.transmissivity_T}"
            )
        if self.speed_of_light_c <= 0:
            raise ValueError("speed of light must be positive")

    @property
    def ellipticity(self) -> float:
        return self.mirror2.ellipticity


@dataclass(frozen=True)
class ModeIndex:
    """Longitudinal index q and transverse indices (m, n) of a TEM_mn mode."""

    q: int
    m: int = 0
    n: int = 0

    def __post_init__(self):
        if self.q < 0 or self.m < 0 or self.n < 0:
            raise ValueError(f"mode indices must be >= 0, got {(self.q, self.m, self.n)}")


def effective_lengths(geom: CavityGeometry) -> tuple[float, float]:
    """Effective cavity lengths (L_eff_x, L_eff_y) for a tilted crystal.

    L_eff_x = L - lc*[|cos b| + (sin^2 b (2 nc^2 - sin^2 b) - nc^2) / (nc^2 - sin^2 b)^(3/2)]
    L_eff_y = L - lc*[|cos b| - cos^2 b / (nc^2 - sin^2 b)^(1/2)]

    Both reduce to L - lc*(1 - 1/nc) at b = 0, and to L when lc = 0.
    """
    L = geom.length_L
    lc = geom.crystal.length_lc
    nc = geom.crystal.refractive_index_nc
    beta = geom.crystal.tilt_beta
    s2 = math.sin(beta) ** 2
    c2 = math.cos(beta) ** 2
    ac = abs(math.cos(beta))
    den = nc * nc - s2  # > 0 because nc > 1
    lx = L - lc * (ac + (s2 * (2 * nc * nc - s2) - nc * nc) / den**1.5)
    ly = L - lc * (ac - c2 / math.sqrt(den))
    return lx, ly


def optical_length(geom: CavityGeometry) -> float:
    """Optical round-trip half-length L_opt = L + [sqrt(nc^2 - sin^2 b) - |cos b|]*lc."""
    nc = geom.crystal.refractive_index_nc
    beta = geom.crystal.tilt_beta
    lc = geom.crystal.length_lc
    return geom.length_L + (
        math.sqrt(nc * nc - math.sin(beta) ** 2) - abs(math.cos(beta))
    ) * lc


def g_parameters(geom: CavityGeometry) -> tuple[float, float, float, float]:
    """The four 1D-cavity g-parameters (g1x, g2x, g1y, g2y).

    g1 = 1 - L_eff/R1 and g2 = 1 - L_eff/R2 along each transverse
    direction.  Raises StabilityError unless both products g1*g2 lie
    strictly inside (0, 1), the paraxial stability range on which the
    resonance formula is valid.
    """
    lx, ly = effective_lengths(geom)
    r1 = geom.mirror1.radius_x
    g1x = 1.0 - lx / r1
    g2x = 1.0 - lx / geom.mirror2.radius_x
    g1y = 1.0 - ly / r1
    g2y = 1.0 - ly / geom.mirror2.radius_y
    for label, prod in (("x", g1x * g2x), ("y", g1y * g2y)):
        if not 0.0 < prod < 1.0:
            raise StabilityError(
                f"g-parameter product along {label} is {prod:.6g}, outside (0, 1): "
                "cavity unstable or on a stability boundary"
            )
    return g1x, g2x, g1y, g2y


def _transverse_phases(geom: CavityGeometry) -> tuple[float, float]:
    """(arccos sqrt(g1x g2x), arccos sqrt(g1y g2y)), the one-way Gouy phases."""
    g1x, g2x, g1y, g2y = g_parameters(geom)
    return math.acos(math.sqrt(g1x * g2x)), math.acos(math.sqrt(g1y * g2y))


def resonance_frequency(geom: CavityGeometry, mode: ModeIndex) -> float:
    """Angular resonance frequency of the TEM_mn mode with longitudinal index q.

    w_qmn = (pi c / L_opt) * [q + (m + 1/2)/pi * arccos sqrt(g1x g2x)
                                + (n + 1/2)/pi * arccos sqrt(g1y g2y)]
    """
    phix, phiy = _transverse_phases(geom)
    lopt = optical_length(geom)
    c = geom.speed_of_light_c
    return (math.pi * c / lopt) * (
        mode.q + (mode.m + 0.5) / math.pi * phix + (mode.n + 0.5) / math.pi * phiy
    )


def signal_decay_rate(geom: CavityGeometry) -> float:
    """Cavity decay rate of the signal modes, gamma_s = c*T/(4*L_opt)."""
    return geom.speed_of_light_c * geom.transmissivity_T / (4.0 * optical_length(geom))


def detuning(geom: CavityGeometry) -> float:
    """Signed TEM01 - TEM10 resonance splitting.

    Delta = c * (arccos sqrt(g1y g2y) - arccos sqrt(g1x g2x)) / L_opt,
    positive when the y (TEM01) resonance lies above the x (TEM10) one.
    Vanishes for an isotropic cavity (beta = 0, eps = 0).
    """
    phix, phiy = _transverse_phases(geom)
    return geom.speed_of_light_c * (phiy - phix) / optical_length(geom)


def detuning_normalized(geom: CavityGeometry) -> float:
    """Detuning in units of the signal decay rate, Delta/gamma_s."""
    return detuning(geom) / signal_decay_rate(geom)


def detuning_small_anisotropy(geom: CavityGeometry) -> float:
    """Normalized detuning |Delta|/gamma_s to leading order in the anisotropy.

    For small tilt beta and small ellipticity eps, with R2x equal to the
    mirror-1 radius R,

        Dt = (2/T) * [ 2 lc (nc^2 - 1) beta^2 / (R nc^3 sqrt(1 - g^2))
                       + sqrt((1 - g)/(1 + g)) * |eps| ],

    where g is the isotropic g-parameter (beta = 0 effective length over
    the common radius R).  A warning is emitted when beta or |eps| is
    large enough that the expansion degrades; the value is still returned.
    """
    r1 = geom.mirror1.radius_x
    if geom.mirror2.radius_x != r1:
        raise ValueError(
            "the leading-order detuning assumes R2x equal to the mirror-1 radius"
        )
    beta = geom.crystal.tilt_beta
    eps = geom.ellipticity
    if abs(beta) > 0.2 or abs(eps) > 0.01:
        warnings.warn(
            f"leading-order detuning evaluated at beta={beta:.3g}, eps={eps:.3g}; "
            "the expansion degrades for beta beyond ~0.2 rad or |eps| beyond ~1e-2",
            ExpansionValidityWarning,
            stacklevel=2,
        )
    lc = geom.crystal.length_lc
    nc = geom.crystal.refractive_index_nc
    T = geom.transmissivity_T
    l_iso = geom.length_L - lc * (1.0 - 1.0 / nc)
    g = 1.0 - l_iso / r1
    if not -1.0 < g < 1.0:
        raise StabilityError(f"isotropic g-parameter {g:.6g} outside (-1, 1)")
    tilt_term = 2.0 * lc * (nc * nc - 1.0) * beta * beta / (
        r1 * nc**3 * math.sqrt(1.0 - g * g)
    )
    astig_term = math.sqrt((1.0 - g) / (1.0 + g)) * abs(eps)
    return (2.0 / T) * (tilt_term + astig_term)


def with_anisotropy(
    geom: CavityGeometry, beta: float | None = None, epsilon: float | None = None
) -> CavityGeometry:
    """Copy of ``geom`` with the crystal tilt and/or mirror-2 ellipticity replaced.

    The ellipticity is applied by adjusting R2y = R2x*(1 - eps).
    """
    out = geom
    if beta is not None:
        out = replace(out, crystal=replace(out.crystal, tilt_beta=beta))
    if epsilon is not None:
        if epsilon >= 1.0:
            raise ValueError(f"ellipticity must be below 1, got {epsilon}")
        r2x = out.mirror2.radius_x
        out = replace(out, mirror2=MirrorSpec(radius_x=r2x, radius_y=r2x * (1.0 - epsilon)))
    return out


def anisotropy_tolerance(
    geom_template: CavityGeometry,
    target_V_opt: float,
    rel_tol: float = 1e-6,
) -> tuple[float, float]:
    """Largest tilt and ellipticity compatible with a squeezing target.

    Inverts the optimum-squeezing law V_opt = |Dt|/(1 + |Dt|) to a bound
    |Dt| <= target/(1 - target), then bisects the exact normalized
    detuning for the largest beta (with eps = 0) and the largest eps
    (with beta = 0) that still meet the bound.  Returns (beta_max,
    eps_max); bisection runs to a relative tolerance of ``rel_tol``.

    Raises NoBracketError when no crossing exists below the validity
    limits (beta approaching pi/2, eps approaching 1).
    """
    if not 0.0 < target_V_opt < 1.0:
        raise ValueError(f"target V_opt must lie in (0, 1), got {target_V_opt}")
    dt_max = target_V_opt / (1.0 - target_V_opt)

    def dt_beta(b):
        return abs(detuning_normalized(with_anisotropy(geom_template, beta=b, epsilon=0.0)))

    def dt_eps(e):
        return abs(detuning_normalized(with_anisotropy(geom_template, beta=0.0, epsilon=e)))

    beta_max = _bisect_crossing(dt_beta, dt_max, hi_limit=math.pi / 2 * 0.999, rel_tol=rel_tol)
    eps_max = _bisect_crossing(dt_eps, dt_max, hi_limit=0.999, rel_tol=rel_tol)
    return beta_max, eps_max


def _bisect_crossing(fn, level, hi_limit, rel_tol):
    """Largest x in [0, hi_limit] with fn(x) <= level, for fn increasing from fn(0) ~ 0.

    Expands an upper bracket geometrically, then bisects.  Derivative-free
    on purpose: fn is cheap and monotone over the sweep range.
    """
    if fn(0.0) > level:
        raise NoBracketError("target already violated at zero anisotropy")
    lo, hi = 0.0, min(0.01, hi_limit)
    while fn(hi) <= level:
        if hi >= hi_limit:
            raise NoBracketError(
                f"no crossing of {level:.6g} below the validity limit {hi_limit:.6g}"
            )
        lo = hi
        hi = min(hi * 2.0, hi_limit)
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if fn(mid) <= level:
            lo = mid
        else:
            hi = mid
    return lo


def typical_geometry(
    beta: float = 0.0, epsilon: float = 0.0, L: float = 1.0, c: float = 1.0
) -> CavityGeometry:
    """A representative OPO cavity used throughout the examples and sweeps.

    Both curvature radii are twice the cavity length, the crystal is a
    tenth of the cavity with index 2, and the output coupling is 1%.
    """
    if epsilon >= 1.0:
        raise ValueError(f"ellipticity must be below 1, got {epsilon}")
    return CavityGeometry(
        length_L=L,
        mirror1=MirrorSpec.spherical(2.0 * L),
        mirror2=MirrorSpec(radius_x=2.0 * L, radius_y=2.0 * L * (1.0 - epsilon)),
        crystal=CrystalSpec(length_lc=0.1 * L, refractive_index_nc=2.0, tilt_beta=beta),
        transmissivity_T=0.01,
        speed_of_light_c=c,
    )


_CONFIG_KEYS = {"L", "R", "R2x", "R2y", "lc", "nc", "beta", "epsilon", "T", "c"}


def geometry_from_config(cfg: dict) -> CavityGeometry:
    """Build a CavityGeometry from a flat key/value mapping.

    Recognized keys: L, R (mirror-1 radius), R2x, R2y, lc, nc, beta
    (radians), epsilon, T, c.  ``epsilon`` and ``R2y`` are mutually
    exclusive ways of setting the mirror-2 astigmatism; R2x defaults to
    R, beta and epsilon default to 0, c defaults to 1.
    """
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown geometry keys: {sorted(unknown)}")
    missing = [k for k in ("L", "R", "lc", "nc", "T") if k not in cfg]
    if missing:
        raise ValueError(f"missing geometry keys: {missing}")
    if "epsilon" in cfg and "R2y" in cfg:
        raise ValueError("give either epsilon or R2y for mirror 2, not both")
    L = float(cfg["L"])
    R = float(cfg["R"])
    r2x = float(cfg.get("R2x", R))
    if "R2y" in cfg:
        r2y = float(cfg["R2y"])
    else:
        eps = float(cfg.get("epsilon", 0.0))
        if eps >= 1.0:
            raise ValueError(f"ellipticity must be below 1, got {eps}")
        r2y = r2x * (1.0 - eps)
    return CavityGeometry(
        length_L=L,
        mirror1=MirrorSpec.spherical(R),
        mirror2=MirrorSpec(radius_x=r2x, radius_y=r2y),
        crystal=CrystalSpec(
            length_lc=float(cfg["lc"]),
            refractive_index_nc=float(cfg["nc"]),
            tilt_beta=float(cfg.get("beta", 0.0)),
        ),
        transmissivity_T=float(cfg["T"]),
        speed_of_light_c=float(cfg.get("c", 1.0)),
    )
