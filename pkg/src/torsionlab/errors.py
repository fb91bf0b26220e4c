"""Exception types shared across the package.

Every domain error derives from TorsionLabError so the CLI can map
failures onto exit codes uniformly.
"""


class TorsionLabError(Exception):
    pass


class NotAUnit(TorsionLabError):
    """Determinant is not +1 or -1."""


class NoIntegerSolution(TorsionLabError):
    """Linear system has no solution over Z."""


class NotSymmetric(TorsionLabError):
    """Matrix expected to be exactly symmetric."""


class ShapeMismatch(TorsionLabError):
    """Matrix or complex shapes are incompatible."""


class NotAcyclic(TorsionLabError):
    """Complex has nonzero integral homology."""

    def __init__(self, degree, detail=""):
        self.degree = degree
        super().__init__(f"nonzero homology in degree {degree}{detail}")


class NotEquivalence(TorsionLabError):
    """Chain map is not a chain equivalence (mapping cone not acyclic)."""


class NonSymmetricHomologyPairing(TorsionLabError):
    """Middle-cohomology pairing failed to be symmetric; phi0 data invalid."""


class DimensionNotDivisibleBy4(TorsionLabError):
    pass


class NotEven(TorsionLabError):
    """Form has an odd diagonal entry."""


class NotFiltered(TorsionLabError):
    """Map does not respect the filtration."""


class BadBounds(TorsionLabError):
    """Truncation bounds out of range."""


class NotAdmissible(TorsionLabError):
    """Filtered complex fails the n-admissibility conditions."""


class NotContractible(TorsionLabError):
    """No contraction exists."""


class NotSplit(TorsionLabError):
    """Top differential does not extend to a direct sum system."""


class AlphaNotInvertible(TorsionLabError):
    """Assembled alpha map is not unipotent; contraction data invalid."""


class UnknownSuite(TorsionLabError):
    pass


class SchemaError(TorsionLabError):
    """Document does not match the JSON schema."""


class InternalCheckFailed(TorsionLabError):
    """Two internally cross-checked computation routes disagreed."""
