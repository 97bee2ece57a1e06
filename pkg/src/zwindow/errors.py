"""Error taxonomy shared across the package.

Every failure mode the library reports deliberately is one of these; anything
else escaping is a bug.  The CLI maps them to exit codes (contract -> 2,
infeasible/rejected window -> 3, ingest/IO -> 4).
"""


class ZWindowError(Exception):
    """Base class for all deliberate errors raised by this package."""


class ContractError(ZWindowError, ValueError):
    """An argument violates a documented precondition."""


class PrecisionError(ZWindowError, ArithmeticError):
    """Requested accuracy cannot be certified at the given working precision."""


class WindowRejection(ZWindowError):
    """A candidate window fails a structural requirement (e.g. even zero count
    where an odd interior count is required)."""


class InfeasibleError(ZWindowError):
    """A constrained problem instance has an empty feasible set."""


class IngestError(ZWindowError):
    """An external data file is missing, malformed, or inconsistent."""
