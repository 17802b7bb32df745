"""Exception and warning types shared across the toolkit."""


class DopoError(Exception):
    """Base class for all toolkit errors."""


class StabilityError(DopoError):
    """Cavity g-parameter product falls outside (0, 1); the resonance
    formulas (arccos of a square root) are invalid there."""


class SingularityError(DopoError):
    """A spectral quantity was requested exactly at a pole; callers
    should treat the point as a limit or exclude it from grids."""


class NoBracketError(DopoError):
    """Root bracketing failed within the physical validity range."""


class DivergenceError(DopoError):
    """Deterministic integration left its trust region; the parameter
    regime or step size is invalid."""


class TrajectoryDiverged(DopoError):
    """A stochastic trajectory crossed the divergence threshold."""


class DivergenceBudgetError(DopoError):
    """The fraction of diverged trajectories is too large for unbiased
    ensemble averaging."""


class InsufficientData(DopoError):
    """Too few usable segments for spectral estimation."""


class BelowThresholdError(DopoError):
    """Operation requires an above-threshold bright mode (rho > 0)."""


class NoStationaryState(DopoError):
    """The requested stationary quantity does not exist (zero relaxation
    eigenvalue)."""


class InvalidRegime(DopoError):
    """Input data violates the assumptions of an estimator."""


class ExpansionValidityWarning(UserWarning):
    """A leading-order expansion was evaluated outside its comfort zone."""


class LinearizationValidityWarning(UserWarning):
    """A linearized result was evaluated where the linearization degrades."""


class StepSizeWarning(UserWarning):
    """Integration step larger than recommended for the target accuracy."""
