"""Exception types shared across the package."""


class BlendrecError(Exception):
    """Base class for all package errors."""


class ParseError(BlendrecError):
    """A data file line could not be parsed.

    Carries the offending path and 1-based line number.
    """

    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


class DuplicateRatingError(ParseError):
    """The same (user, item) pair appears twice in a ratings file."""


class InvalidArgumentError(BlendrecError, ValueError):
    """An operation was called with out-of-contract arguments."""


class ColdStartError(BlendrecError):
    """A recommender cannot produce a family-specific prediction.

    Raised by ``raw_score`` when the user/item has no usable training
    signal; callers resolve it through the mean-based fallback chain.
    """

    def __init__(self, user, item, reason):
        self.user = user
        self.item = item
        self.reason = reason
        super().__init__(f"cold start for (user={user}, item={item}): {reason}")


class TrainingError(BlendrecError):
    """Model training failed (bad inputs or numerical divergence)."""


class MissingInputError(TrainingError):
    """A required training input (e.g. a genre catalog) was not supplied."""


class PipelineError(BlendrecError):
    """An orchestration-level failure, e.g. every grid candidate failed."""
