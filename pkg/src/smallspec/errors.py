"""Exception types raised across the package."""


class NyquistError(ValueError):
    """A tracked frequency lies above the grid's Nyquist frequency."""


class GridMismatchError(ValueError):
    """Two signals on different grids were combined."""


class AdmissibilityError(ValueError):
    """A modulation frequency breaks the spectral separation bound."""


class DisjointnessError(RuntimeError):
    """New spectrum pieces overlap the existing spectral support."""


class CapacityError(ValueError):
    """The requested run needs more samples or frequency range than allowed."""


class MissingHistoryError(ValueError):
    """A check needs per-stage signals that were not retained."""
