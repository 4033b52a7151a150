"""Exception hierarchy shared across the package."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        if self.line:
            return f"{self.line}:{self.col}: {self.kind}: {self.message}"
        return f"{self.kind}: {self.message}"


class InvsynError(Exception):
    pass


class SpecError(InvsynError):
    """Raised for any problem with spec or clause source; carries diagnostics."""

    kind = "SpecError"

    def __init__(self, diagnostics):
        if isinstance(diagnostics, Diagnostic):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))

    @classmethod
    def at(cls, message, pos=None):
        line, col = pos if pos else (0, 0)
        return cls(Diagnostic(cls.kind, message, line, col))


class SpecSyntaxError(SpecError):
    kind = "SyntaxError"


class SpecTypeError(SpecError):
    kind = "TypeError"


class SpecNameError(SpecError):
    kind = "NameError"


class PrimedVariableError(SpecError):
    kind = "PrimedVariableError"


class UnrepairableScope(SpecError):
    kind = "UnrepairableScope"


def spec_error(diagnostics) -> SpecError:
    """The SpecError subclass matching the first diagnostic's kind."""
    diagnostics = list(diagnostics)
    by_kind = {c.kind: c for c in (SpecSyntaxError, SpecTypeError, SpecNameError,
                                   PrimedVariableError, UnrepairableScope)}
    cls = by_kind.get(diagnostics[0].kind, SpecError) if diagnostics else SpecError
    return cls(diagnostics)


class InstanceError(InvsynError):
    pass


class MissingSort(InstanceError):
    pass


class MissingConstant(InstanceError):
    pass


class StateNotReachable(InvsynError):
    pass


class QueryBudgetExceeded(InvsynError):
    pass


class SynthesisTimeout(InvsynError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class AggregateAdmissionFailed(InvsynError):
    pass


class NotInductiveInput(InvsynError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ProposerUnavailable(InvsynError):
    pass


class NoParsableArray(InvsynError):
    pass
