"""Exception hierarchy for the part-correspondence engine."""


class PartcorrError(Exception):
    """Base class for all engine errors."""


class FormatError(PartcorrError):
    """A binary file does not conform to its declared layout."""


class DataError(PartcorrError):
    """File payload decodes but carries invalid values (NaN/Inf, range)."""


class DimensionError(PartcorrError):
    """Array shapes are inconsistent with each other or with metadata."""


class EmptyRegionError(PartcorrError):
    """A mask that must select at least one element selects none."""


class DegenerateDescriptorError(PartcorrError):
    """A descriptor has zero norm, so cosine similarity is undefined."""


class DegenerateGeometryError(PartcorrError):
    """Too few valid-depth pixels to compute the requested geometry."""


class UndefinedMetricError(PartcorrError):
    """The metric is undefined for this input (e.g. empty ground truth)."""


class IngestionError(PartcorrError):
    """Dataset files are missing, unreadable, or inconsistent."""


class ConfigError(PartcorrError):
    """Invalid configuration value or unknown configuration key."""
