"""Exception hierarchy. The CLI maps the three top-level families to exit codes."""


class EcgFusionError(Exception):
    exit_code = 2


class ConfigError(EcgFusionError):
    exit_code = 1


class DataError(EcgFusionError):
    exit_code = 2


class NumericError(EcgFusionError):
    exit_code = 3


# wfdb ingestion
class MalformedHeader(DataError):
    pass


class UnsupportedFormat(DataError):
    pass


class TruncatedStream(DataError):
    pass


class UnknownCode(DataError):
    pass


class ChecksumMismatch(DataError):
    pass


class RaggedRows(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


# beat pipeline
class EmptyRecord(DataError):
    pass


class EmptyClass(DataError):
    pass


class SingletonClassWarning(UserWarning):
    pass


# gaf / noise
class DomainError(DataError):
    pass


class BadResolution(ConfigError):
    pass


class ZeroPowerSignal(DataError):
    pass


class ZeroPowerNoise(DataError):
    pass


class NoiseRecordMissing(DataError):
    pass


# models / fusion
class ShapeMismatch(DataError):
    pass


class EmptyDataset(DataError):
    pass


class BadSimplex(NumericError):
    pass


class LengthMismatch(DataError):
    pass


class DimMismatch(DataError):
    pass
