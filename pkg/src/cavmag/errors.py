"""Exception types shared across the package."""


class CavmagError(Exception):
    """Base class for all package errors."""


class ModelError(CavmagError, ValueError):
    """Invalid mode, coupling or system definition."""


class SingularEvaluationError(CavmagError, ArithmeticError):
    """A response function hit an exactly singular point.

    Carries the probe frequency and magnon detuning (both Hz) so sweeps can
    record where the evaluation failed.
    """

    def __init__(self, message, f=None, delta_m=None):
        super().__init__(message)
        self.f = f
        self.delta_m = delta_m


class EigenSolverError(CavmagError, RuntimeError):
    """Dense eigensolver failed to converge."""


class IntegratorError(CavmagError, RuntimeError):
    """Master-equation integration left its validity envelope."""


class FitError(CavmagError, RuntimeError):
    """Generic spectrum-fitting failure."""


class NoFeatureError(FitError, ValueError):
    """Spectrum has too little dynamic range to seed a fit."""


class DivergenceError(FitError):
    """Levenberg-Marquardt damping exceeded its cap."""


class SingularJacobianError(FitError):
    """A free parameter has no influence on the residuals."""


class ConfigError(CavmagError, ValueError):
    """Run configuration violates the documented schema."""


class SpectrumFileError(CavmagError, ValueError):
    """Malformed spectrum CSV."""
