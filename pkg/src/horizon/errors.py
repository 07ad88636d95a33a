"""Exception hierarchy shared by all horizon modules."""


class HorizonError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(HorizonError, ValueError):
    pass


class OutOfDomain(HorizonError, ValueError):
    pass


class NoConvergence(HorizonError, RuntimeError):
    pass


class NotUnitSpeed(HorizonError, ValueError):
    pass


class InsufficientData(HorizonError, ValueError):
    pass


class NoCauchySubsequence(HorizonError, RuntimeError):
    pass


class NotStabilized(HorizonError, RuntimeError):
    pass


class HypothesisViolated(HorizonError, ValueError):
    pass


class Undetermined(HorizonError, RuntimeError):
    pass


class NotAChain(HorizonError, ValueError):
    pass


class MismatchedProbe(HorizonError, ValueError):
    pass


class NonpositiveIntegrand(HorizonError, ValueError):
    pass


class SceneError(HorizonError, ValueError):
    """Scene file could not be parsed or failed validation.

    ``line`` and ``column`` are 1-based when known; ``key`` is the dotted path
    of the offending entry for validation failures.
    """

    def __init__(self, message, *, line=None, column=None, key=None):
        self.message = message
        self.line = line
        self.column = column
        self.key = key
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}" + (f", column {column}" if column is not None else ""))
        super().__init__(f"{message} ({'; '.join(where)})" if where else message)


class SceneParseError(SceneError):
    pass


class SceneValidationError(SceneError):
    pass
