"""Exception types shared across the package."""


class VidstoryError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(VidstoryError, ValueError):
    """Dimension disagreement between operands."""


class ZeroVectorError(VidstoryError, ValueError):
    """A direction-dependent operation received a zero vector."""


class EmptyInputError(VidstoryError, ValueError):
    """An operation that needs at least one element received none."""


class NonFiniteError(VidstoryError, ArithmeticError):
    """A NaN or infinity showed up where finite values are required."""


class DataValidationError(VidstoryError, ValueError):
    """A record violates the dataset schema; message names the field."""


class PhaseOrderError(VidstoryError, RuntimeError):
    """A training phase was started before its prerequisite phase."""
