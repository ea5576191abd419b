"""Exception hierarchy.

Every error carries the process exit status the command line front end
reports for it, so library callers and the CLI agree on classification.
"""


class SymbreakError(Exception):
    exit_code = 1

    def record(self) -> dict:
        """Machine-readable description used by the CLI error channel."""
        return {"error": type(self).__name__, "message": str(self), "exit_code": self.exit_code,
                **self.details()}

    def details(self) -> dict:
        return {}


class ConfigError(SymbreakError, ValueError):
    exit_code = 2


class UnknownFamilyError(ConfigError):
    pass


class LayeringError(ConfigError):
    """A layered description violates the BFS layering invariants."""


class InfeasibleError(SymbreakError):
    exit_code = 3


class CeilingExceeded(InfeasibleError):
    def __init__(self, message: str, failing: tuple = ()):
        super().__init__(message)
        self.failing = failing

    def details(self) -> dict:
        return {"failing": list(self.failing)}


class GrowthRefusal(InfeasibleError):
    def __init__(self, message: str, first_failure: int | None = None, report=None):
        super().__init__(message)
        self.first_failure = first_failure
        self.report = report

    def details(self) -> dict:
        return {"first_failure": self.first_failure}


class TruncationTooShallow(InfeasibleError):
    pass


class TooFewUncolored(InfeasibleError):
    pass


class SearchFailure(SymbreakError):
    exit_code = 4

    def __init__(self, message: str, stats: dict | None = None):
        super().__init__(message)
        self.stats = stats or {}

    def details(self) -> dict:
        return {"stats": self.stats}


class IdentityOnSupport(SearchFailure):
    """Some permutation acts trivially on the support, so no coloring can break it."""

    def __init__(self, message: str, offending=()):
        super().__init__(message, {"offending": list(offending)})
        self.offending = list(offending)


class CapExceeded(SymbreakError):
    exit_code = 5

    def __init__(self, message: str, cap: int, partial=None):
        super().__init__(message)
        self.cap = cap
        self.partial = partial

    def details(self) -> dict:
        return {"cap": self.cap}


class NotSetwiseFixed(SymbreakError, ValueError):
    exit_code = 2
