"""Exception types shared across the pipeline."""

from __future__ import annotations


class AdmacError(Exception):
    """Base class for all errors raised by this package."""


# --- domain / indicators ---------------------------------------------------

class ZeroExposure(AdmacError):
    """Rate requested against an exposure population of zero."""


class ZeroSchedule(AdmacError):
    """MAC requested for a schedule whose rates sum to zero."""


class IncompleteSnapshot(AdmacError):
    """Snapshot lacks cells required to build a schedule for the given sex."""


# --- ingest ------------------------------------------------------------------

class ExcludedCountry(AdmacError):
    """Country is on the platform exclusion list."""


class AuthError(AdmacError):
    """Live API rejected the access token."""


class RateLimited(AdmacError):
    """Live API throttled the request (terminal after retries)."""


class FixtureMiss(AdmacError):
    """Fixture mode: no fixture row (or file) matches the query."""


class MalformedResponse(AdmacError):
    """Live API returned something the client cannot interpret."""


class SnapshotIncomplete(AdmacError):
    """Collection finished without all 28 cells; carries what was obtained."""

    def __init__(self, message: str, cells=(), missing=()):
        super().__init__(message)
        self.cells = tuple(cells)
        self.missing = tuple(missing)


# --- groundtruth -------------------------------------------------------------

class ParseError(AdmacError):
    """Input file is structurally unreadable (bad header, encoding, ...)."""

    def __init__(self, message: str, line: int | None = None, column: str | None = None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column})" if column else ")")
        super().__init__(message + loc)
        self.line = line
        self.column = column


# --- stats -------------------------------------------------------------------

class NonFiniteInput(AdmacError):
    """Statistical kernel fed a NaN or infinity."""


class LengthMismatch(AdmacError):
    """Paired vectors differ in length."""


class DegenerateInput(AdmacError):
    """Correlation undefined (a constant vector); reported, never coerced to 0."""


class DegenerateDesign(AdmacError):
    """Regression undefined (all x equal)."""


class TooFewPoints(AdmacError):
    """Not enough observations for the requested procedure."""


class ZeroTruth(AdmacError):
    """MAPE undefined when a truth value is zero."""


class DomainError(AdmacError):
    """Special-function argument outside its domain."""


# --- predict / report --------------------------------------------------------

class UnfittedModel(AdmacError):
    """Prediction requested from a missing or unfitted model."""


class EmptyInput(AdmacError):
    """Emitter refused to write an empty artifact."""


# --- cli / pipeline ----------------------------------------------------------

class MissingStageInput(AdmacError):
    """A stage was run before the stage that produces its input."""


class ConfigError(AdmacError):
    """Run configuration is invalid."""
