class QfeloError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(QfeloError, ValueError):
    """Invalid or unreadable configuration.

    ``key`` is the dotted key path that failed (if any), ``location`` the
    document name plus line/column when the parser reports one.
    """

    def __init__(self, message, key=None, location=None):
        self.key = key
        self.location = location
        parts = []
        if location:
            parts.append(str(location))
        if key:
            parts.append(f"key '{key}'")
        prefix = ": ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class NumericalError(QfeloError, ArithmeticError):
    pass


class QuadratureError(NumericalError):
    def __init__(self, message, last=None, previous=None):
        self.last = last
        self.previous = previous
        super().__init__(message)


class TruncationError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message, last=None):
        self.last = last
        super().__init__(message)


class DesignError(NumericalError):
    pass
