"""Exception hierarchy shared across the package."""


class SurveyBenchError(Exception):
    """Base class for every error raised by surveybench."""


class ConfigError(SurveyBenchError):
    """A configuration file is missing, malformed, or inconsistent."""


# -- ingestion ---------------------------------------------------------------


class IngestionError(SurveyBenchError):
    """Raised when a survey file cannot be turned into a dataset."""


class MissingColumn(IngestionError):
    def __init__(self, column, field=None):
        self.column = column
        self.field = field
        where = f" (mapped to {field!r})" if field else ""
        super().__init__(f"column {column!r}{where} not found in file header")


class EmptyDataset(IngestionError):
    def __init__(self, msg="file contains a header but no data rows"):
        super().__init__(msg)


class RowError(IngestionError):
    """An error tied to one data row; ``row`` is the 0-based data-row index."""

    def __init__(self, row, field, value, reason):
        self.row = row
        self.field = field
        self.value = value
        self.reason = reason
        super().__init__(f"row {row}: field {field!r} value {value!r}: {reason}")


class BadCategoryCode(RowError):
    def __init__(self, row, field, value, allowed=()):
        self.allowed = tuple(allowed)
        reason = "not a declared category code"
        if self.allowed:
            reason += f" (allowed: {', '.join(map(str, self.allowed))})"
        super().__init__(row, field, value, reason)


class InvariantViolation(RowError):
    """A parsed record breaks a record-level rule (age, birth eligibility...)."""


class DuplicateRespondent(RowError):
    pass


# -- weighting ---------------------------------------------------------------


class RakingError(SurveyBenchError):
    pass


class MissingWeightVariable(RakingError):
    def __init__(self, respondent_id, dimension):
        self.respondent_id = respondent_id
        self.dimension = dimension
        super().__init__(
            f"respondent {respondent_id!r} has no usable value for weighting "
            f"dimension {dimension!r}"
        )


class InsufficientCells(RakingError):
    """Some target category has fewer respondents than ``min_cell_count``."""

    def __init__(self, cells, min_cell_count):
        # cells: list of (dimension, category, count)
        self.cells = list(cells)
        self.min_cell_count = min_cell_count
        desc = ", ".join(f"{d}={c} (n={n})" for d, c, n in self.cells)
        super().__init__(
            f"insufficient observations (< {min_cell_count}) in: {desc}"
        )


class EmptyTargetCell(InsufficientCells):
    """A category with a positive target has no respondents at all."""


class InconsistentTargets(RakingError):
    pass


class NoConvergenceWarning(UserWarning):
    pass


# -- estimation / scoring ----------------------------------------------------


class EstimationError(SurveyBenchError):
    pass


class EmptyDenominator(EstimationError):
    pass


class NoEligibleRespondents(EstimationError):
    pass


class UnknownBenchmark(SurveyBenchError, KeyError):
    def __str__(self):
        return f"unknown benchmark {self.args[0]!r}"


class UnitMismatch(SurveyBenchError):
    pass


class MissingYear(SurveyBenchError):
    def __init__(self, years):
        self.years = sorted(years)
        super().__init__(f"birth counts missing for year(s) {self.years}")


# -- sweeps / synthetic ------------------------------------------------------


class EmptyPool(SurveyBenchError):
    pass


class PoolTooSmall(SurveyBenchError):
    pass


class SizeExceedsPopulation(SurveyBenchError):
    pass
