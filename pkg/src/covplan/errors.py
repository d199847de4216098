class CovplanError(ValueError):
    """Raised for invalid user input: malformed files, bad parameters, unmet preconditions."""


class ModelError(CovplanError):
    pass


class CoverageError(CovplanError):
    pass


class ScoreError(CovplanError):
    pass


class FitError(CovplanError):
    """Logistic fit could not produce finite, identifiable estimates."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)
