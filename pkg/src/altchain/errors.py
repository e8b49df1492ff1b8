"""Exception hierarchy shared by all engines.

Every error carries a ``code`` equal to its class name so the CLI can report
it verbatim.
"""

from __future__ import annotations


class NessError(Exception):
    """Base class for all errors raised by altchain."""

    @property
    def code(self) -> str:
        return type(self).__name__


class InvalidSpec(NessError, ValueError):
    """One or more invariants of a chain/strip/simulation spec are violated.

    ``violations`` is a list of ``(code, message)`` pairs, one per broken
    invariant, so callers see every problem at once.
    """

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = list(violations)
        super().__init__("; ".join(f"{c}: {m}" for c, m in self.violations))

    @property
    def codes(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.violations)

    @property
    def code(self) -> str:
        return self.violations[0][0] if self.violations else "InvalidSpec"


class UnstableDrift(NessError):
    pass


class SolverBreakdown(NessError):
    pass


class TooLarge(NessError):
    pass


class PinningUnsupported(NessError):
    pass


class QuadratureNotConverged(NessError):
    pass


class DegenerateBands(NessError):
    pass


class UnnormalizedUnits(NessError, ValueError):
    """Band formulas need k = 1 and m_a + m_b = 1; see ``normalize_units``."""


class NoSignChange(NessError):
    pass


class VanishingWronskian(NessError):
    pass


class NonFiniteState(NessError):
    pass


class InsufficientBlocks(NessError):
    pass


class IoFailure(NessError):
    pass
