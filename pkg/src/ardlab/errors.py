"""Exception types shared across the library."""


class ArdlabError(Exception):
    """Base class for all library errors."""


class ContractError(ArdlabError):
    """An argument or call violates a documented precondition."""


class NumericError(ArdlabError):
    """A computation produced NaN/Inf or left its numeric domain."""


class FormatError(ArdlabError):
    """A file or byte stream does not match its declared format."""


class EstimationError(ArdlabError):
    """An iterative estimator failed to converge."""


class TrainingDivergedError(ArdlabError):
    """Training loss exploded; carries the offending epoch."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch}: loss={loss:.3e}")
        self.epoch = epoch
        self.loss = loss


class ConfigError(ArdlabError):
    """An experiment config file is malformed or contains unknown keys."""
