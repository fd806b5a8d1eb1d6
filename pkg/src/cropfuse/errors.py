"""Exception hierarchy.

Everything raised on bad input data derives from :class:`DataError` so the
CLI can map it to a single exit code; configuration problems derive from
:class:`ConfigError`.
"""


class CropfuseError(Exception):
    """Base class for all package errors."""


class DataError(CropfuseError, ValueError):
    """Input data violates a precondition."""


class ConfigError(CropfuseError, ValueError):
    """Invalid configuration or parameter."""


class DimensionError(DataError):
    pass


class MissingConversionError(DataError):
    """No bushel weight is known for a crop reported in bushels."""


class UndefinedYieldError(DataError):
    pass


class EmptyCountyError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class RankError(DataError):
    """Design matrix is rank deficient."""


class HeadGapError(DataError):
    """Series starts with a gap too long to forward-predict from."""


class WindowError(DataError):
    """Season window contains no samples."""


class DegenerateFeatureError(DataError):
    pass


class InsufficientOverlapError(DataError):
    pass
