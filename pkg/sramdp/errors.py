"""
Exception types for the sramdp simulator
"""


class SramDpError(Exception):
    """Base class for all sramdp errors"""


class ConfigError(SramDpError, ValueError):
    """Invalid input value or configuration (CLI exit code 2)"""


class SizeGuardError(ConfigError):
    """Exact enumeration requested beyond its size guard"""


class NumericError(SramDpError, ArithmeticError):
    """Numeric or convergence failure (CLI exit code 3)"""


class UnboundedEpsilonError(NumericError):
    """A failure-prone position with f = 0 makes the privacy budget unbounded"""


class InfeasibleConstraintsError(NumericError):
    """Moment constraints cannot be met by any distribution over the candidates"""
