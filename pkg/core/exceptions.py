"""Exception hierarchy shared by the analysis pipeline."""


class QKDError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(QKDError):
    """Invalid protocol/channel parameters or a malformed parameter file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CountsFormatError(QKDError):
    """The counts file does not follow the sent/gain table schema."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column '{column}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class EventFormatError(QKDError):
    """A malformed record in an event stream."""

    def __init__(self, message, index=None):
        self.index = index
        if index is not None:
            message = f"record {index}: {message}"
        super().__init__(message)


class UnidentifiableParametersError(QKDError):
    """Sent counts do not determine the window probabilities."""


class InsufficientCountsError(QKDError):
    """Not enough reference counts (or denominators are zero)."""


class AnalysisInfeasibleError(QKDError):
    """The finite-key chain cannot produce a bound with these statistics."""
