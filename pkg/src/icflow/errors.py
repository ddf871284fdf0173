"""Exception hierarchy for icflow."""


class IcflowError(Exception):
    """Base class for all errors raised by icflow."""


class NonPositiveRadius(IcflowError, ValueError):
    pass


class DimensionMismatch(IcflowError, ValueError):
    pass


class SingularMetric(IcflowError, ArithmeticError):
    pass


class UnsupportedMode(IcflowError, NotImplementedError):
    pass


class NonFiniteIntegrand(IcflowError, ArithmeticError):
    pass


class InvalidK(IcflowError, ValueError):
    pass


class FlowError(IcflowError):
    """Terminal error during a flow run.

    Carries the flow time at which the run failed and, when raised from
    :func:`icflow.flow.run`, the diagnostics recorded before the failure.
    """

    def __init__(self, message, t=None, records=None):
        super().__init__(message)
        self.t = t
        self.records = list(records) if records is not None else []


class StarShapeLost(FlowError):
    pass


class ConvexityLost(FlowError):
    pass


class StepUnderflow(FlowError):
    pass


class ConfigError(IcflowError, ValueError):
    """Invalid run configuration; ``line`` and ``column`` locate the problem when known."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column
