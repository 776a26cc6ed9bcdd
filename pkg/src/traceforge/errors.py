"""Exception hierarchy shared by the engine, HTTP API, and CLI.

Every error carries a stable ``code`` string that the service layer maps to
an HTTP status and the CLI maps to an exit code.
"""

from __future__ import annotations


class TraceForgeError(Exception):
    """Base class; ``code`` is stable across releases, ``detail`` is free-form."""

    code = "Internal"

    def __init__(self, message: str, *, detail: object = None):
        super().__init__(message)
        self.message = message
        self.detail = detail


class ValidationError(TraceForgeError):
    code = "Validation"


class InvalidArtifactIdError(ValidationError):
    code = "InvalidArtifactId"


class NotFoundError(TraceForgeError):
    code = "NotFound"


class KindChangedError(TraceForgeError):
    code = "KindChanged"


class DanglingEndpointError(TraceForgeError):
    code = "DanglingEndpoint"


class TypeMatrixViolationError(TraceForgeError):
    code = "TypeMatrixViolation"


class DuplicateLinkError(TraceForgeError):
    code = "Duplicate"


class SelfLinkError(TraceForgeError):
    code = "SelfLink"


class AlreadyDeletedError(TraceForgeError):
    code = "AlreadyDeleted"


class EmptySeedsError(TraceForgeError):
    code = "EmptySeeds"


class UnknownSeedError(TraceForgeError):
    code = "UnknownSeed"


class SeedDeletedError(TraceForgeError):
    code = "SeedDeleted"


class IllegalTransitionError(TraceForgeError):
    code = "IllegalTransition"


class GuardFailedError(TraceForgeError):
    code = "GuardFailed"


class WrongStateError(TraceForgeError):
    code = "WrongState"


class UnknownItemError(TraceForgeError):
    code = "UnknownItem"


class AlreadyResolvedError(TraceForgeError):
    code = "AlreadyResolved"


class DuplicateNameError(TraceForgeError):
    code = "DuplicateName"


class RuleConfigError(TraceForgeError):
    """Rule config file problems: syntax, unknown kinds/types, bad DAL sets."""

    code = "RuleSyntax"


class UnknownKindError(RuleConfigError):
    code = "UnknownKind"


class UnknownLinkTypeError(RuleConfigError):
    code = "UnknownLinkType"


class BadDalSetError(RuleConfigError):
    code = "BadDalSet"


class IncompatibleTypesError(TraceForgeError):
    code = "IncompatibleTypes"


class ParseFailureError(TraceForgeError):
    """Raised only when an ingest payload is rejected wholesale (see CLI exit 3)."""

    code = "ParseDiagnostics"


class StorageFailureError(TraceForgeError):
    code = "StorageFailure"


class ChainBrokenError(StorageFailureError):
    code = "ChainBroken"

    def __init__(self, message: str, *, seq: int, detail: object = None):
        super().__init__(message, detail=detail)
        self.seq = seq


class BadEventError(StorageFailureError):
    code = "BadEvent"

    def __init__(self, message: str, *, seq: int, detail: object = None):
        super().__init__(message, detail=detail)
        self.seq = seq
