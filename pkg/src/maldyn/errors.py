"""Exception hierarchy shared by every stage.

Data errors (bad inputs) derive from ``DataError`` so the CLI can map them
to a distinct exit code.
"""


class MaldynError(Exception):
    pass


class DataError(MaldynError, ValueError):
    """Raised for invalid input data. ``sample_id`` is attached when known."""

    def __init__(self, message, sample_id=None):
        super().__init__(message)
        self.sample_id = sample_id

    def __str__(self):
        msg = super().__str__()
        if self.sample_id is not None:
            return f"[{self.sample_id}] {msg}"
        return msg


# behavior_log
class MalformedXml(DataError):
    pass


class SchemaViolation(DataError):
    pass


class ManifestError(DataError):
    pass


class DuplicateSampleId(ManifestError):
    pass


class MissingField(ManifestError):
    pass


class UnreadableFile(DataError):
    pass


# featurize / reduce
class EmptyCorpus(DataError):
    pass


class VocabularyMismatch(DataError):
    pass


# transform
class ZeroWidth(DataError):
    pass


class EmptyInput(DataError):
    pass


# gbdt
class EmptyData(DataError):
    pass


class SingleClass(DataError):
    pass


class ModelFormatError(DataError):
    pass


# reduce / cluster
class KTooLarge(DataError):
    pass


class NonMirroredLayers(DataError):
    pass


class NaNLoss(MaldynError):
    def __init__(self, epoch):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch


class NonPositiveEps(DataError):
    pass


# generate
class CorpusTooShort(DataError):
    pass


# similarity
class ZeroVector(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class EmptyCandidate(DataError):
    pass


class UnnormalizedHistogram(DataError):
    pass


# predict
class UnknownScheme(DataError):
    pass


class UndatedSample(DataError):
    pass


class EmptyGeneratedSet(DataError):
    pass


# cli
class ConfigError(MaldynError):
    pass
