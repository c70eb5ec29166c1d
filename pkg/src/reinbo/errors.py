"""Exception hierarchy shared across the package."""


class ReinboError(Exception):
    """Base class for all package errors."""


class ContractViolation(ReinboError, ValueError):
    """A caller broke an operation's precondition."""


class InputError(ReinboError, ValueError):
    """Bad user-supplied data (dataset file, labels, config values)."""


class ConfigError(ReinboError, ValueError):
    """Run configuration is inconsistent, e.g. a budget too small for one probe."""


class NumericalError(ReinboError, ArithmeticError):
    """A numerical routine failed, e.g. Cholesky after maximum jitter."""
