"""Exception hierarchy shared across the package."""


class DrhwError(Exception):
    """Base class for all package errors."""


class GraphError(DrhwError):
    """Structural problem in a subtask graph (cycle, dangling edge, ...)."""


class WorkloadFormatError(DrhwError):
    """A workload document could not be parsed or violates an invariant."""


class OrderError(DrhwError):
    """A load order is not a valid permutation or cannot be executed."""


class SearchLimitExceeded(DrhwError):
    """An exact search was requested beyond its configured size limit."""


class StoreFormatError(DrhwError):
    """A schedule-store document is malformed or internally inconsistent."""


class LatencyMismatch(StoreFormatError):
    """A store built for one reconfiguration latency was used with another."""


class CapacityError(DrhwError):
    """A task instance needs more physical tiles than the platform has."""


class ConsistencyError(DrhwError):
    """Run-time state contradicts the design-time entry it is paired with."""
