"""Exception types raised across the package."""

import numpy as np


class InvalidParameterError(ValueError):
    pass


class InvalidDegreeError(InvalidParameterError):
    pass


class MeshValidationError(ValueError):
    pass


class MeshConformityError(MeshValidationError):
    pass


class MeshParseError(ValueError):
    """Malformed mesh document; ``context`` names the offending line/field."""

    def __init__(self, message, context=None):
        self.context = context
        if context:
            message = f"{message} ({context})"
        super().__init__(message)


class UnsupportedOrderError(ValueError):
    pass


class UnsupportedDegreeError(ValueError):
    pass


class ConditioningError(np.linalg.LinAlgError):
    pass


class SolverFailure(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
