class DDQError(Exception):
    """Base class of every error raised by ddq_helper"""


# Validation errors: bad input, bad geometry, bad schedule (CLI exit code 2)

class ValidationError(DDQError, ValueError):
    pass


class CoordinateError(ValidationError):
    pass


class DegenerateRegionError(ValidationError):
    pass


class PatternParseError(ValidationError):
    def __init__(self, message, row, col):
        super().__init__('{} (row {}, col {})'.format(message, row, col))
        self.row = row
        self.col = col


class ConfigError(ValidationError):
    pass


class PreconditionError(ValidationError):
    pass


class ScheduleError(ValidationError):
    pass


class GeometryError(ValidationError):
    pass


class PlacementError(ValidationError):
    pass


class ScenarioError(ValidationError):
    pass


# Analysis errors: a pipeline could not produce a number (CLI exit code 3)

class AnalysisError(DDQError):
    pass


class InsufficientDataError(AnalysisError):
    pass


class FitError(AnalysisError):
    pass


class DegenerateRateError(AnalysisError):
    pass
