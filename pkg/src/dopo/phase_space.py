"""Phase-space state of the three-mode OPO in the positive-P representation.

Each cavity mode m in {0 (pump), x, y} is described by a pair of
independent complex amplitudes (a_m, a_m+).  Along stochastic
trajectories a_m+ is *not* the complex conjugate of a_m; the pair only
coincides with (a, a*) on the classical (noise-free) manifold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Component order used by every array-based integrator in the package.
COMPONENTS = ("a0", "a0p", "ax", "axp", "ay", "ayp")


@dataclass(frozen=True)
class PhaseSpaceState:
    """The six complex positive-P amplitudes (a0, a0+, ax, ax+, ay, ay+)."""

    a0: complex
    a0p: complex
    ax: complex
    axp: complex
    ay: complex
    ayp: complex

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("phase-space amplitudes must be finite")

    @classmethod
    def from_classical(cls, a0: complex, ax: complex, ay: complex) -> "PhaseSpaceState":
        """State on the classical manifold, where a+ = conj(a)."""
        return cls(
            a0=complex(a0), a0p=complex(np.conj(a0)),
            ax=complex(ax), axp=complex(np.conj(ax)),
            ay=complex(ay), ayp=complex(np.conj(ay)),
        )

    @classmethod
    def from_array(cls, arr) -> "PhaseSpaceState":
        a = np.asarray(arr, dtype=complex).reshape(6)
        return cls(*map(complex, a))

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.a0, self.a0p, self.ax, self.axp, self.ay, self.ayp], dtype=complex
        )

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.as_array())))
