"""Exception types shared across the package."""

from __future__ import annotations


class NeurosteerError(Exception):
    """Base class for all package-specific errors."""


class FileFormatError(NeurosteerError):
    """A binary or text payload violates its declared layout.

    Carries the byte offset at which the violation was detected, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class BadMagic(FileFormatError):
    pass


class VersionUnsupported(FileFormatError):
    pass


class TruncatedFile(FileFormatError):
    pass


class NonFiniteSample(FileFormatError):
    pass


class IoFailure(NeurosteerError):
    pass


class InvalidRecording(NeurosteerError):
    pass


class BadLabel(NeurosteerError):
    pass


class UnsortedTriggers(NeurosteerError):
    pass


class IndexOutOfRange(NeurosteerError):
    pass


class TriggerFormatError(NeurosteerError):
    pass


class WindowOutOfBounds(NeurosteerError):
    pass


class ChannelCountMismatch(NeurosteerError):
    pass


class TooFewEpochs(NeurosteerError):
    pass


class TooFewMinoritySamples(NeurosteerError):
    pass


class SingleClassInput(NeurosteerError):
    pass


class NotEnoughNeighbors(NeurosteerError):
    pass


class ShapeMismatch(NeurosteerError):
    pass


class LabelOutOfRange(NeurosteerError):
    pass


class NonFiniteGradient(NeurosteerError):
    pass


class LengthMismatch(NeurosteerError):
    pass


class EmptyMatrix(NeurosteerError):
    pass


class UnstableFilter(NeurosteerError):
    pass


class NyquistViolation(NeurosteerError):
    pass


class SingleChannel(NeurosteerError):
    pass


class MissingPrestim(NeurosteerError):
    pass


class RankDeficient(NeurosteerError):
    pass


class SignalTooShort(NeurosteerError):
    pass


class BandOutOfRange(NeurosteerError):
    pass


class EmptyClass(NeurosteerError):
    pass


class UnknownChannel(NeurosteerError):
    pass


class MissingCoords(NeurosteerError):
    pass


class ConnectionLost(NeurosteerError):
    pass


class GapDetected(NeurosteerError):
    pass


class ModelShapeMismatch(NeurosteerError):
    pass


class ConfigError(NeurosteerError):
    pass
