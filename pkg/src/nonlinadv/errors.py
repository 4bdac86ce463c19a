"""Exception types shared across the package."""


class DagError(ValueError):
    """Base class for malformed computation graphs."""


class CycleError(DagError):
    pass


class ConnectivityError(DagError):
    pass


class MergeError(DagError):
    pass


class ZeroMassBranch(ArithmeticError):
    pass


class TooLarge(RuntimeError):
    """Path enumeration exceeded the configured cap."""


class EmptyHistogram(ValueError):
    pass


class EmptyMask(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class NonFiniteLoss(FloatingPointError):
    """Loss became NaN or infinite; training diverged."""


class GraphStateError(RuntimeError):
    """backward() called without a preceding forward pass."""


class UnsupportedLayer(TypeError):
    pass


class InvalidSpec(ValueError):
    pass


class OracleMismatch(AssertionError):
    def __init__(self, message, counterexample=None):
        super().__init__(message)
        self.counterexample = counterexample
