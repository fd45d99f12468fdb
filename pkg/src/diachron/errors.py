"""Exception types shared across the toolkit, mapped to process exit codes."""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class DiachronError(Exception):
    """Base class for all toolkit errors."""

    exit_code = EXIT_DATA


class ParseError(DiachronError):
    """A malformed row in an input file; carries the 1-based line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class IntegrityError(DiachronError):
    """Cross-record inconsistency: duplicate ids, unknown references, etc."""


class UnknownVenueError(IntegrityError):
    """A venue id that is not present in the vocabulary under query."""


class EmptyCorpusError(DiachronError):
    """Filtering/pruning removed every trail from a corpus."""


class DegenerateInputError(DiachronError):
    """Structurally valid input on which the requested quantity is undefined."""


class NumericError(DiachronError):
    """Non-finite values or diverging optimization."""

    exit_code = EXIT_NUMERIC


class UsageError(DiachronError):
    """Bad configuration or command-line usage."""

    exit_code = EXIT_USAGE
