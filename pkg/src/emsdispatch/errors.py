"""Error types shared across all layers.

Every error carries a stable machine-readable ``code`` so the HTTP layer can
map it to a status without string matching.
"""

from __future__ import annotations


class DispatchError(Exception):
    """Base class for all domain errors."""

    code = "INTERNAL"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code

    @property
    def message(self) -> str:
        return str(self)


class ValidationError(DispatchError):
    code = "VALIDATION"


class DuplicateIdError(DispatchError):
    code = "DUPLICATE_ID"


class NotFoundError(DispatchError):
    code = "NOT_FOUND"


class UnknownTableError(DispatchError):
    code = "UNKNOWN_TABLE"


class UnknownPatientError(DispatchError):
    code = "UNKNOWN_PATIENT"


class UnknownEscError(DispatchError):
    code = "UNKNOWN_ESC"


class DuplicateRequestError(DispatchError):
    code = "DUPLICATE"


class WrongTerminalError(DispatchError):
    code = "WRONG_TERMINAL"


class BadStateError(DispatchError):
    code = "BAD_STATE"


class EmptyFleetError(DispatchError):
    code = "EMPTY_FLEET"


class StorageError(DispatchError):
    code = "STORAGE_FAILURE"


class BindError(DispatchError):
    code = "BIND_FAILURE"


class TargetUnreachableError(DispatchError):
    code = "TARGET_UNREACHABLE"
