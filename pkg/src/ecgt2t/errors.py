"""Exception types raised across the package."""


class EcgError(Exception):
    """Base class for all package errors."""


class OutOfBounds(EcgError):
    pass


class MissingLead(EcgError):
    pass


class LengthMismatch(EcgError):
    pass


class InvalidRate(EcgError):
    pass


class DurationTooShort(EcgError):
    pass


class FormatError(EcgError):
    pass


class ClassTooSmall(EcgError):
    pass


class ShapeMismatch(EcgError):
    pass


class InvalidProbability(EcgError):
    pass


class InvalidTarget(EcgError):
    pass


class EmptyDataset(EcgError):
    pass


class NonFiniteLoss(EcgError):
    def __init__(self, step, detail=""):
        super().__init__(f"non-finite loss at step {step}: {detail}".rstrip(": "))
        self.step = step


class UntrainedModel(EcgError):
    pass


class ModeMismatch(EcgError):
    pass


class SignalTooShort(EcgError):
    pass


class RateMismatch(EcgError):
    pass


class NoMatches(EcgError):
    pass


class MissingCheckpoint(EcgError):
    pass


class SingleClass(EcgError):
    pass


class SingleClassDataset(EcgError):
    pass


class DegenerateResampling(EcgError):
    pass


class WindowTooLong(EcgError):
    pass
