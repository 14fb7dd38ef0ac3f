class SocialIRLError(Exception):
    """Base class for package errors."""


class ValidationError(SocialIRLError, ValueError):
    """An input value violates its domain (score out of range, bad field)."""


class ConfigError(SocialIRLError, ValueError):
    """Inconsistent configuration, e.g. strict stance thresholds with hi <= lo."""


class ParseError(SocialIRLError, ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno is not None else message)


class EligibilityError(SocialIRLError, ValueError):
    """Trajectory too short for reward estimation."""


class ConvergenceError(SocialIRLError, RuntimeError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (last residual {residual:.3e})")


class NumericalError(SocialIRLError, FloatingPointError):
    """Overflow or NaN inside the solver."""


class StoreError(SocialIRLError, ValueError):
    """A trajectory store or profile file is corrupt."""
