"""Exception hierarchy shared by the engine modules."""


class HistLogicError(Exception):
    """Base class for all engine errors."""


class DimensionMismatch(HistLogicError, ValueError):
    pass


class TooLarge(HistLogicError, ValueError):
    """A dense object would exceed the configured size guard."""


class NonHermitian(HistLogicError, ValueError):
    pass


class NotAProjector(HistLogicError, ValueError):
    pass


class NonProjectorGenerator(NotAProjector):
    pass


class NonCommutingGenerators(HistLogicError, ValueError):
    def __init__(self, first: str, second: str):
        super().__init__(f"generators {first!r} and {second!r} do not commute")
        self.pair = (first, second)


class UnknownStatementName(HistLogicError, KeyError):
    def __str__(self):
        return f"unknown statement name {self.args[0]!r}"


class NotInAlgebra(HistLogicError, ValueError):
    pass


class NotationalConflict(HistLogicError, ValueError):
    def __init__(self, name: str):
        super().__init__(f"statement {name!r} is mapped to different projectors")
        self.name = name


class IncompatibleFrameworks(HistLogicError, ValueError):
    def __init__(self, message: str, pair: tuple[str, str] | None = None):
        super().__init__(message)
        self.pair = pair


class NonUnitaryStep(HistLogicError, ValueError):
    pass


class CountMismatch(HistLogicError, ValueError):
    pass


class GridError(HistLogicError, ValueError):
    pass


class InconsistentFamily(HistLogicError, ValueError):
    pass


class ZeroWeightCondition(HistLogicError, ZeroDivisionError):
    pass
