"""Exception hierarchy. Each top-level family maps onto a CLI exit code."""


class RhoqError(Exception):
    exit_code = 1


class ConfigError(RhoqError, ValueError):
    exit_code = 2

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DataError(RhoqError, ValueError):
    exit_code = 3


class NumericalError(RhoqError, ArithmeticError):
    exit_code = 4


# -- data errors --------------------------------------------------------------

class MalformedRow(DataError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class NonPositivePrice(MalformedRow):
    pass


class NonMonotoneTimestamp(MalformedRow):
    pass


class EmptySeries(DataError):
    pass


class NoPrecedingTick(DataError):
    pass


class EmptyWindow(DataError):
    pass


class EmptyOverlap(DataError):
    pass


class DtMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class MisalignedSeries(DataError):
    pass


class ScaleExceedsLength(DataError):
    pass


class ScaleTooSmall(DataError):
    pass


class SpanTooShort(DataError):
    pass


class ConstantInput(DataError):
    pass


# -- numerical errors ---------------------------------------------------------

class DegenerateVariance(NumericalError):
    """A detrended box had zero variance, so its (co)variance power is undefined."""

    def __init__(self, series: str, scale: int, box: int):
        self.series = series
        self.scale = scale
        self.box = box
        super().__init__(f"zero detrended variance in series {series}, scale {scale}, box {box}")


class ZeroDenominator(NumericalError):
    pass


class InsufficientScales(NumericalError):
    pass


class NonPositiveFluctuation(NumericalError):
    pass


class SingularRegressors(NumericalError):
    pass
