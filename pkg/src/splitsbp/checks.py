"""Residual-check records shared by the operator verification suites."""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = ["Check", "VerificationReport"]


@dataclass(frozen=True)
class Check:
    """A single named residual compared against a tolerance."""

    name: str
    residual: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.residual <= self.tol

    @classmethod
    def flag(cls, name: str, ok: bool) -> "Check":
        """Boolean check encoded as residual 0 (pass) or 1 (fail) vs tol 0."""
        return cls(name, 0.0 if ok else 1.0, 0.0)


@dataclass
class VerificationReport:
    """Collection of checks for one operator, with free-form notes."""

    subject: str
    checks: list[Check] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def add(self, name: str, residual: float, tol: float) -> None:
        self.checks.append(Check(name, float(residual), float(tol)))

    def add_flag(self, name: str, ok: bool) -> None:
        self.checks.append(Check.flag(name, ok))

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.ok]

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            status = "PASS" if c.ok else "FAIL"
            out.append(
                f"{status}  {c.name:<42s} residual {c.residual:10.3e}  (tol {c.tol:.1e})"
            )
        return out
