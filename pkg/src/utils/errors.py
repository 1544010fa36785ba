"""Exception hierarchy shared by the analysis modules, harnesses and the CLI."""


class AlphaModError(Exception):
    """Base class for every error raised by this package."""


class StructuralError(AlphaModError):
    """Inputs have incompatible shapes, grids or index spaces."""


class RegistryError(AlphaModError, KeyError):
    """A registry id (signal, weight generator, symbol, profile, experiment) is unknown."""

    def __str__(self) -> str:
        return Exception.__str__(self)


class ParameterError(AlphaModError, ValueError):
    """A numerical parameter is outside the admissible range."""


class UnsupportedEndpointError(ParameterError):
    """alpha = 1 (the dyadic endpoint) is not handled by the alpha-covering."""


class CoverageViolationError(AlphaModError):
    """The truncated patch family does not cover the requested frequency."""


class ResolutionError(AlphaModError):
    """The grid cannot resolve the requested object (guard band, derivatives)."""


class DomainError(AlphaModError):
    """A sample point lies outside the periodic box."""


class QuadratureError(AlphaModError):
    """Cube quadrature failed: singular weight at nodes or under-resolved cube."""


class DegenerateWeightError(AlphaModError):
    """A weighted integral vanished where a positive value is required."""


class EllipsoidFitError(AlphaModError):
    """The reducing-operator ellipsoid fit did not reach its residual tolerance."""


class WindowError(AlphaModError):
    """A sequence escapes the index window of a matrix."""


class SymbolError(AlphaModError):
    """A multiplier symbol or one of its derivatives could not be evaluated."""


class ConfigError(AlphaModError):
    """An experiment configuration could not be parsed or validated."""
