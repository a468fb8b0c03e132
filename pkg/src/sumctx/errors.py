"""Exception hierarchy shared across the package."""


class SumctxError(Exception):
    """Base class for all domain errors raised by this package."""


class CorpusError(SumctxError):
    """Malformed or invalid corpus input.

    ``line`` is the 1-based source line when the error came from a file.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TokenizerError(SumctxError):
    pass


class MarkerCollisionError(SumctxError):
    def __init__(self, collisions):
        self.collisions = list(collisions)
        shown = ", ".join(f"{d}#{t}" for d, t in self.collisions[:5])
        super().__init__(f"segment markers occur in corpus text at {shown}")


class BackendError(SumctxError):
    """A summarizer or generator backend failed."""

    def __init__(self, message: str, dialogue_id: str | None = None,
                 turn_range: tuple[int, int] | None = None):
        self.dialogue_id = dialogue_id
        self.turn_range = turn_range
        if dialogue_id is not None:
            where = f"dialogue {dialogue_id}"
            if turn_range is not None:
                where += f" turns {turn_range[0]}-{turn_range[1]}"
            message = f"{where}: {message}"
        super().__init__(message)


class BudgetError(SumctxError):
    pass


class CacheError(SumctxError):
    """Summary cache I/O failure, kept distinct from BackendError."""
