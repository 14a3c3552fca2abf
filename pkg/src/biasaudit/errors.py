"""Exception hierarchy.

Everything raised on purpose derives from :class:`AuditError`. The CLI maps
:class:`ValidationError` subclasses to exit status 1 and every other
:class:`AuditError` to exit status 2.
"""


class AuditError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(AuditError):
    """Bad user input detected before any real work starts."""


# -- dataset ---------------------------------------------------------------

class MissingFile(AuditError, FileNotFoundError):
    pass


class MalformedLine(AuditError):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnknownLabel(MalformedLine):
    pass


class UnknownGroup(MalformedLine):
    pass


class TooFewSubjects(AuditError):
    pass


class InvalidSpec(ValidationError):
    pass


class EmptyResult(UserWarning):
    """Warning: a group filter left at least one emotion class without samples."""


# -- imgproc ---------------------------------------------------------------

class BadMagic(AuditError):
    pass


class BadHeader(AuditError):
    pass


class TruncatedPayload(AuditError):
    pass


class UnsupportedMaxval(AuditError):
    pass


class NonPositiveGamma(AuditError, ValueError):
    pass


class ShiftTooLarge(AuditError, ValueError):
    pass


class ZeroDimension(AuditError, ValueError):
    pass


class DegenerateLandmarks(AuditError, ValueError):
    pass


# -- nn --------------------------------------------------------------------

class InvalidConfig(ValidationError):
    pass


class ShapeMismatch(AuditError, ValueError):
    pass


class LabelOutOfRange(AuditError, ValueError):
    pass


class EmptyTrainSet(AuditError):
    pass


class VersionMismatch(AuditError):
    pass


class ConfigFingerprintMismatch(AuditError):
    pass


class CorruptFile(AuditError):
    pass


class MissingClassWarning(UserWarning):
    """Warning: a training set lacks one or more emotion classes."""


# -- lime ------------------------------------------------------------------

class BadK(AuditError, ValueError):
    pass


class LengthMismatch(AuditError, ValueError):
    pass


class SingularSystem(AuditError):
    pass


class DimensionMismatch(AuditError, ValueError):
    pass


class DegenerateModel(UserWarning):
    """Warning: every perturbed prediction was identical, nothing to explain."""


class FewSamplesWarning(UserWarning):
    pass


# -- bias ------------------------------------------------------------------

class EmptyInput(AuditError, ValueError):
    pass


# -- config ----------------------------------------------------------------

class ParseError(ValidationError):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnknownKey(ValidationError):
    pass


class ConfigTypeError(ValidationError, TypeError):
    pass
