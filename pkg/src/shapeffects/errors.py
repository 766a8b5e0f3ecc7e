"""Exception hierarchy shared by all modules."""


class ShapEffectsError(Exception):
    """Base class for all errors raised by this package."""


class SubsetError(ShapEffectsError):
    """Invalid subset mask or unsupported dimension."""


class IncompleteTableError(ShapEffectsError):
    """A conditional-element table is missing entries required for aggregation."""


class InvalidVarianceError(ShapEffectsError):
    """Var(Y) is nonpositive, or a variance-like quantity is out of range."""


class TableKindError(ShapEffectsError):
    """An operation received a table of the wrong kind without a conversion flag."""


class EstimatorError(ShapEffectsError):
    """Invalid estimator arguments (degenerate inner sample size, bad subset, ...)."""


class BudgetExceededError(ShapEffectsError):
    """The model-evaluation budget limit would be exceeded."""


class AllocationError(ShapEffectsError):
    """Invalid budget-allocation request."""


class ProcedureError(ShapEffectsError):
    """A Shapley-estimation procedure was invoked with unusable parameters."""


class SingularCovarianceError(ShapEffectsError):
    """A conditioning block of the covariance is not usable even after regularization."""


class DataError(ShapEffectsError):
    """Problem with an observed-data sample or its file representation."""


class MissingColumnError(DataError):
    """A column named in the schema is absent from the file."""


class RaggedRowError(DataError):
    """A CSV row has a different number of fields than the header."""


class EmptyDataError(DataError):
    """The data file contains no usable rows."""


class ModelProtocolError(ShapEffectsError):
    """The external-model line protocol was violated."""


class ModelTimeoutError(ModelProtocolError):
    """The external model did not reply within the batch deadline."""


class ModelExitError(ModelProtocolError):
    """The external model exited before answering all queries."""


class ConfigurationError(ShapEffectsError):
    """Invalid or inconsistent run configuration."""
