"""
Exception hierarchy.

Errors that surface to clients carry the wire ErrorCode they are reported
with; the proxy and node servers translate them into ERROR frames.
"""

from typing import Optional, Sequence


class SecNoSqlError(Exception):
    """Base class for all toolkit errors."""

    # ErrorCode value reported on the wire, None when the error never crosses it
    code: Optional[int] = None


# ========== crypto ==========

class KeyDerivationError(SecNoSqlError):
    """Master key missing, malformed or of the wrong length."""


class DecryptionError(SecNoSqlError):
    """Ciphertext of invalid length or padding; signals corruption."""
    code = 2


# ========== query ==========

class QueryParseError(SecNoSqlError):
    """Syntax error; offset is the byte offset into the UTF-8 query text."""
    code = 3

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UnsupportedPredicateError(QueryParseError):
    """WHERE clause other than equality on the partition key."""


class SchemaError(SecNoSqlError):
    """Unknown or conflicting table or column."""
    code = 4


# ========== store / proxy ==========

class NotFoundError(SecNoSqlError):
    code = 1


class IntegrityError(SecNoSqlError):
    """Stored row does not match its ledger tag."""
    code = 2


class BackendError(SecNoSqlError):
    """No replica reachable, or the storage tier failed."""
    code = 5


class ProtocolError(SecNoSqlError):
    """Malformed frame. Reported with the parse error code."""
    code = 3


# ========== sla ==========

class FitError(SecNoSqlError):
    """Surface fit impossible (too few samples or rank-deficient design)."""

    def __init__(self, message: str, deficient_columns: Sequence[str] = ()):
        super().__init__(message)
        self.deficient_columns = list(deficient_columns)


# ========== cli / bench ==========

class ConfigError(SecNoSqlError):
    """Invalid configuration; carries the validation issues that blocked it."""

    def __init__(self, message: str, issues: Sequence = ()):
        super().__init__(message)
        self.issues = list(issues)


class BenchCorrectnessError(SecNoSqlError):
    """A benchmark read returned a wrong value or failed integrity."""
