"""Exception types shared across the package."""


class AtcLabError(Exception):
    """Base class for all errors raised by atclab."""


# --- text normalization ---

class NotANumeral(AtcLabError):
    pass


class TooLarge(AtcLabError):
    pass


class EmptyAfterNormalization(AtcLabError):
    pass


# --- audio / corpus ingest ---

class UnsupportedFormat(AtcLabError):
    pass


class CorruptHeader(AtcLabError):
    pass


class OutOfBounds(AtcLabError):
    pass


class WrongRate(AtcLabError):
    pass


class MissingAudio(AtcLabError):
    pass


# --- WER ---

class EmptyReference(AtcLabError):
    pass


class EmptyCorpus(AtcLabError):
    pass


class MismatchedInputs(AtcLabError):
    pass


# --- model ---

class DimensionMismatch(AtcLabError):
    pass


class RankTooLarge(AtcLabError):
    pass


class NothingToMerge(AtcLabError):
    pass


class NothingToUnmerge(AtcLabError):
    pass


class TokenOutOfRange(AtcLabError):
    pass


class SequenceTooLong(AtcLabError):
    pass


class NoRecordedForward(AtcLabError):
    pass


# --- training ---

class AllPositionsMasked(AtcLabError):
    pass


class EmptyDataset(AtcLabError):
    pass


class NonFiniteLoss(AtcLabError):
    pass


# --- experiment ---

class BadK(AtcLabError):
    pass


class RankTooLargeForModel(AtcLabError):
    pass


class EmptyResults(AtcLabError):
    pass


class IoFailure(AtcLabError):
    pass
