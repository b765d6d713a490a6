"""Exception hierarchy shared by all msplace modules."""


class MsplaceError(Exception):
    """Base class for every error raised by this package."""


class ScenarioFormatError(MsplaceError, ValueError):
    """A scenario or scheme document is structurally malformed."""


class DimensionMismatchError(MsplaceError, ValueError):
    """A deployment scheme does not match the scenario's servers or services."""


class ChainError(MsplaceError, ValueError):
    """Chain conversion failed (unknown entry function or a dependency cycle)."""


class UndefinedRoutingError(MsplaceError):
    """A service that must receive requests has no instance anywhere."""

    def __init__(self, service: str):
        super().__init__(f"service {service!r} has no deployed instance; routing is undefined")
        self.service = service


class EnumerationTooLargeError(MsplaceError):
    """The exhaustive response-path enumeration exceeds its guard."""


class StateSpaceTooLargeError(MsplaceError):
    """The exhaustive scheme search exceeds its guard."""


class InfeasibleScenarioError(MsplaceError):
    """No feasible deployment scheme could be produced."""

    def __init__(self, message: str, service: str | None = None):
        super().__init__(message)
        self.service = service


class InsufficientCapacityError(InfeasibleScenarioError):
    """No server has room for another instance of a service that still needs one."""

    def __init__(self, service: str):
        super().__init__(f"no server can host another instance of service {service!r}", service)


class GeneratorConfigError(MsplaceError, ValueError):
    """Generator configuration is invalid or cannot produce a feasible scenario."""
