"""Exception hierarchy. Each class carries the CLI exit category it maps to."""


class ReducedHedgeError(Exception):
    category = "numerical"


class DimensionMismatchError(ReducedHedgeError, ValueError):
    """Two inputs disagree along a named axis."""

    def __init__(self, axis: str, expected, got, what: str = ""):
        self.axis = axis
        self.expected = expected
        self.got = got
        where = f" ({what})" if what else ""
        super().__init__(f"dimension mismatch on {axis}{where}: expected {expected}, got {got}")


class NonFiniteError(ReducedHedgeError, ValueError):
    """An input holds NaN or Inf; ``index`` is the first offending position."""

    def __init__(self, name: str, index: tuple):
        self.name = name
        self.index = index
        super().__init__(f"non-finite entry in {name} at index {index}")


class BasisMismatchError(ReducedHedgeError, ValueError):
    pass


class SingularSystemError(ReducedHedgeError, ArithmeticError):
    pass


class ConvergenceError(ReducedHedgeError, ArithmeticError):
    pass


class ConfigError(ReducedHedgeError, ValueError):
    category = "config"


class CorruptFileError(ReducedHedgeError, OSError):
    category = "io"


class FormatVersionError(ReducedHedgeError, ValueError):
    category = "io"


class MissingStateError(ReducedHedgeError, KeyError):
    category = "config"

    def __str__(self):
        return str(self.args[0]) if self.args else "missing state variable"
