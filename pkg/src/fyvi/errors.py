class NumericFailure(ArithmeticError):
    """A numerical routine did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CovarianceError(NumericFailure):
    """A mixture component covariance could not be factorized."""

    def __init__(self, component, message=None):
        super().__init__(message or f"covariance of component {component} is not positive definite")
        self.component = component

    def __reduce__(self):
        return type(self), (self.component, str(self)), self.__dict__


class FormatError(ValueError):
    """Malformed binary or text input."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset

    def __reduce__(self):
        return type(self), (str(self),), self.__dict__
