"""Exception types shared across the package."""


class LinkageHMMError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(LinkageHMMError, ValueError):
    """Ancestry vector or recombination rate outside its domain."""


class InvalidMapError(LinkageHMMError, ValueError):
    """Genetic map with a negative or otherwise unusable distance."""


class InvalidGenotypeError(LinkageHMMError, ValueError):
    """Observed allele outside {0, 1, MISSING}."""


class StructuralError(LinkageHMMError, ValueError):
    """Dimension mismatch between genotypes, frequencies and map."""


class InvalidInputError(LinkageHMMError, ValueError):
    """Structurally valid but unusable input (e.g. no observed markers)."""


class SizeGuardError(LinkageHMMError, ValueError):
    """Exact-enumeration oracle asked to run beyond its size guard."""


class InvalidComparisonError(LinkageHMMError, ValueError):
    """Likelihood-ratio comparison between fits of different data."""


class NumericError(LinkageHMMError, RuntimeError):
    """Non-finite value produced during optimization or differentiation."""


class ConfigError(LinkageHMMError, ValueError):
    """Invalid simulation or experiment configuration."""


class ParseError(LinkageHMMError, ValueError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")
