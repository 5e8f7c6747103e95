"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument is outside its documented domain."""


class CapacityError(ValueError):
    """A requested structure is too large to materialize exactly."""


class ConfigurationError(ValueError):
    """A configuration is internally inconsistent."""


class ReconciliationError(RuntimeError):
    """A cost-ledger identity failed to hold after a run."""
