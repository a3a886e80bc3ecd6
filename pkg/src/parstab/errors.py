"""Exception types raised across the package."""


class ParstabError(Exception):
    pass


class NumericalBlowup(ParstabError, ArithmeticError):
    """A drift, diffusion or state evaluation produced a non-finite value."""

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class ControlNoiseLeak(ParstabError):
    """A control-dependent row of the system meets a nonzero derivative of V.

    When this happens the generator is no longer affine in the control and the
    universal formula does not apply.
    """


class IndefiniteClf(ParstabError, ValueError):
    pass


class EmptyEnsemble(ParstabError, ValueError):
    pass


class ConvergenceOrderOutOfRange(ParstabError):
    def __init__(self, message, weak_order=None, strong_order=None):
        super().__init__(message)
        self.weak_order = weak_order
        self.strong_order = strong_order
