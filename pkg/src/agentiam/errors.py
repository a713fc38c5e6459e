"""Exception hierarchy shared by every module.

Each error carries a stable machine-readable ``code`` so callers (and the
CLI) can map failures to exit codes without parsing messages.
"""

from __future__ import annotations


class IamError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class InvalidInputError(IamError):
    """An argument failed basic validation (empty seed, bad charset, ...)."""

    code = "invalid-input"


class UnsupportedValueError(IamError):
    """A value outside the canonical serialization domain (e.g. a float)."""

    code = "unsupported-value"


class KeyNotFoundError(IamError):
    """A keyId was not listed in the relevant document."""

    code = "key-not-found"


class VerificationRefusedError(IamError):
    """Signature verification refused because the document is decommissioned."""

    code = "verification-refused"


class UnauthorizedError(IamError):
    """Caller's key does not control the object it tried to mutate."""

    code = "unauthorized"


class LifecycleViolationError(IamError):
    """A lifecycle transition outside the permitted transition map."""

    code = "lifecycle-violation"


class IssuerInactiveError(IamError):
    """Credential issuance attempted from a non-active issuer document."""

    code = "issuer-inactive"


class ResolutionFailureError(IamError):
    """A DID could not be resolved to a document."""

    code = "resolution-failure"


class MonotonicityViolationError(IamError):
    """A status-list update tried to clear or re-set an already-set bit."""

    code = "monotonicity-violation"


class UnknownClaimError(IamError):
    """A disclosure referenced a claim key absent from the credential."""

    code = "unknown-claim"


class ReplayDetectedError(IamError):
    """A presentation was bound to a different verifier nonce."""

    code = "replay-detected"


class AnsParseError(IamError):
    """Agent name or pattern failed the grammar; ``offset`` points at the fault."""

    code = "parse-error"

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class ConflictError(IamError):
    """An identifier is already taken (registry name, session, binding)."""

    code = "conflict"


class RegistrationRefusedError(IamError):
    """Registry refused a record (e.g. the agent document is revoked)."""

    code = "registration-refused"


class InvalidQueryError(IamError):
    """A resolution query is malformed (bad version range, missing fields)."""

    code = "invalid-query"


class PolicyLoadError(IamError):
    """A policy document failed validation at load time."""

    code = "load-error"


class SessionTerminatedError(IamError):
    """Operation attempted against a terminated session."""

    code = "session-terminated"


class IdentityRevokedError(IamError):
    """Session establishment refused because the agent document is not active."""

    code = "identity-revoked"


class NotFoundError(IamError):
    """Lookup target does not exist."""

    code = "not-found"


class InvalidEntryError(IamError):
    """An audit entry is missing required fields."""

    code = "invalid-entry"


class ClockViolationError(IamError):
    """A tick regressed relative to the log head."""

    code = "clock-violation"


class InvalidPredicateError(IamError):
    """A compliance predicate is not expressible in the predicate language."""

    code = "invalid-predicate"


class ScenarioError(IamError):
    """A scenario script referenced unknown entities or malformed steps."""

    code = "scenario-error"
