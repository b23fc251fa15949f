"""Shared exception types."""


class ValidationError(ValueError):
    """Bad input data or configuration; maps to CLI exit code 2."""


class OracleError(RuntimeError):
    """Failure while querying a victim model; maps to CLI exit code 3.

    ``retriable`` distinguishes transport-level faults (timeouts, 5xx,
    malformed JSON) from contract violations that retrying cannot fix.
    """

    def __init__(self, message: str, retriable: bool = False):
        super().__init__(message)
        self.retriable = retriable
