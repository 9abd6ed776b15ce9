"""Exception types raised across the package."""


class QuasiSparseError(Exception):
    pass


class ParameterError(QuasiSparseError, ValueError):
    """A parameter lies outside its mathematical domain."""


class DomainError(QuasiSparseError, ValueError):
    """A formula was evaluated outside the region where it is defined."""


class DimensionError(QuasiSparseError, ValueError):
    """Array shapes do not agree."""
