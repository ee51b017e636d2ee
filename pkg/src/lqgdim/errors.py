"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter lies outside the range where a formula or sampler is defined."""


class ResolutionError(ValueError):
    """The lattice is too coarse for the requested scale."""


class InsufficientDataError(ValueError):
    """Not enough samples/replicates/points to produce an estimate."""


class MissingInputError(FileNotFoundError):
    """Result files needed for an acceptance check are absent."""
