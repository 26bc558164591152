"""Exception hierarchy. Every data error derives from :class:`CraveError`."""


class CraveError(ValueError):
    """Base class for data and contract errors (CLI exit status 1)."""


# study pipeline
class EmptyTable(CraveError):
    pass


class DegenerateAnnotator(CraveError):
    pass


class TooFewAnnotators(CraveError):
    pass


class AllRejected(CraveError):
    pass


class OrphanVideo(CraveError):
    pass


# text
class MisalignedTags(CraveError):
    pass


class NoLevels(CraveError):
    pass


class EmptyPrompt(CraveError):
    pass


# encoders / model
class BadDims(CraveError):
    pass


class TooFewFrames(CraveError):
    pass


class ZeroVector(CraveError):
    pass


# objective / metrics
class ConstantTarget(CraveError):
    pass


class BatchTooSmall(CraveError):
    pass


class ConstantInput(CraveError):
    pass


class AllTied(CraveError):
    pass


class RankDeficient(CraveError):
    pass


class TooFewItems(CraveError):
    pass


# harness
class ParseError(CraveError):
    pass


class DuplicateId(CraveError):
    pass


class MissingField(CraveError):
    pass


class EmptyDataset(CraveError):
    pass


class MissingMos(CraveError):
    pass


class NoLabels(CraveError):
    pass


class CheckpointError(CraveError):
    pass
