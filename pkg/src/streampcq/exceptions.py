"""Exception hierarchy shared across the package.

Everything raised on purpose derives from StreamPcqError so callers (and the
CLI) can map failures to exit codes without matching on message strings.
"""


class StreamPcqError(Exception):
    """Base class for all errors raised by this package."""


# --- bitstream parsing ---

class BitstreamError(StreamPcqError):
    """Base class for bitstream framing and syntax errors."""


class EmptyStream(BitstreamError):
    pass


class TruncatedUnit(BitstreamError):
    def __init__(self, offset: int, detail: str = ""):
        self.offset = offset
        msg = f"stream truncated inside unit starting at byte offset {offset}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class BitstreamExhausted(BitstreamError):
    pass


class MalformedExpGolomb(BitstreamError):
    pass


class ProfileMismatch(BitstreamError):
    pass


class MissingParameterSet(BitstreamError):
    pass


class NonPositivePointCount(StreamPcqError):
    pass


class MissingField(StreamPcqError):
    pass


class InconsistentTbpp(StreamPcqError):
    pass


# --- model evaluation ---

class DivisionByZeroMos(StreamPcqError):
    pass


# --- fitting / calibration ---

class CalibrationError(StreamPcqError):
    pass


class DegenerateDesign(CalibrationError):
    pass


class MissingReferenceTc(CalibrationError):
    pass


class TooFewTqpLevels(CalibrationError):
    pass


class TooFewContents(CalibrationError):
    pass


class TooFewPoints(CalibrationError):
    pass


class EmptyCloud(CalibrationError):
    pass


# --- subjective score processing ---

class ZeroVariance(StreamPcqError):
    pass


class TooFewObservers(StreamPcqError):
    pass


class DegenerateRange(StreamPcqError):
    pass


class EmptyStimulus(StreamPcqError):
    pass


# --- evaluation protocol ---

class LengthMismatch(StreamPcqError):
    pass


class TooFewSamples(StreamPcqError):
    pass


class MismatchedStimuli(StreamPcqError):
    pass


class EmptyTestSet(StreamPcqError):
    pass
