"""Exception types shared across the package."""


class NumericRangeError(ArithmeticError):
    """A computation left the representable floating point range.

    Raised instead of silently returning ``nan``/``inf`` or a non-positive
    height, e.g. for ``exp_map`` with a huge tangent vector or ``psi`` with
    an overflowing last coordinate.
    """


class InconsistencyError(RuntimeError):
    """An oracle disagreed with a predicate it was supposed to agree with."""
