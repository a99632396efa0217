"""Exception types shared across the pipeline."""


class AgbMapError(Exception):
    """Base class for all pipeline errors."""


class CrsMismatch(AgbMapError):
    pass


class GridMismatch(AgbMapError):
    pass


class EmptySource(AgbMapError):
    pass


class BadClassCode(AgbMapError):
    pass


class EmptySeries(AgbMapError):
    pass


class EmptyWindow(AgbMapError):
    pass


class MissingModality(AgbMapError):
    pass


class DegenerateChannel(AgbMapError):
    pass


class TooFewUnits(AgbMapError):
    pass


class EmptyMask(AgbMapError):
    pass


class ShapeMismatch(AgbMapError):
    pass


class InsufficientData(AgbMapError):
    pass


class NoSupervisedPixels(AgbMapError):
    pass


class NoSupervision(AgbMapError):
    pass


class DivergedLoss(AgbMapError):
    pass


class ModalityMismatch(AgbMapError):
    pass


class StatsMismatch(AgbMapError):
    pass


class EmptySplit(AgbMapError):
    pass


class InsufficientOverlap(AgbMapError):
    pass


class ConfigError(AgbMapError):
    """Invalid run configuration; message lists every violated field."""
