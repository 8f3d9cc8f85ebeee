"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
OSError -> 3.
"""


class DataError(Exception):
    """Input data violates the canonical formats or the label contract."""


class MalformedRecordError(DataError):
    """A point or label file does not parse; message names file and position."""


class UnmappedClassError(DataError):
    """A raw class has no entry in the dataset's label map."""


class ConfigError(Exception):
    """A config file, flag combination, or pipeline layout is invalid."""
