"""Exception hierarchy. The CLI maps every HetsimError to exit code 1."""


class HetsimError(Exception):
    pass


class DistributionError(HetsimError, ValueError):
    pass


class GraphError(HetsimError, ValueError):
    """Invalid pipeline description or modification."""

    def __init__(self, message: str, violations: list | None = None):
        super().__init__(message)
        self.violations = list(violations or [])


class TraceParseError(HetsimError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SimulationError(HetsimError):
    pass


class DeadlockError(SimulationError):
    def __init__(self, message: str, blocked: list[str]):
        super().__init__(message)
        self.blocked = blocked


class MetricsError(HetsimError, ValueError):
    pass
