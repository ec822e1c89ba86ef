"""Exception hierarchy shared across the package.

Every failure mode that callers are expected to handle has its own class so
the service layer and the CLI can map errors to stable exit codes without
string matching.
"""


class EllboundsError(Exception):
    """Base class for all package errors."""


class ConfigError(EllboundsError):
    """Malformed or incomplete experiment configuration."""


class ModelError(EllboundsError):
    """Invalid model parameters (non-SPD scatter, broken constraint, ...)."""


class ShapeError(EllboundsError):
    """Dimension mismatch between arrays."""


class SamplingError(EllboundsError):
    """Radial quantile evaluation or draw generation failed."""


class MomentError(EllboundsError):
    """A required moment does not exist for the requested generator."""


class BatchMismatch(EllboundsError):
    """Function samples built on different batches were combined."""


class SingularSpan(EllboundsError):
    """Span Gram matrix is numerically singular and regularization is off."""


class ScoreError(EllboundsError):
    """Score evaluation failed (overflow, constraint projection failure)."""


class SingularFim(EllboundsError):
    """Fisher information (or its nuisance block) is numerically singular."""


class NonIdentifiable(EllboundsError):
    """Efficient score collapsed: the interest direction is confounded."""


class SubmodelError(EllboundsError):
    """Tilted submodel is not a valid density in the working tilt ball."""


class ScheduleError(EllboundsError):
    """Sieve schedule is not strictly increasing / bases are not nested."""


class IntegrityError(EllboundsError):
    """A numerical self-check that must hold by construction failed."""


class EstimatorError(EllboundsError):
    """Estimator preconditions violated (rank deficiency, R < 2, ...)."""


class NonConvergence(EstimatorError):
    """Fixed-point iteration exceeded max_iter.

    Carries the last relative residual so reports can show how far off the
    iteration stopped.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual
