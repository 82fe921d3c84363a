"""Uniform record for one evaluated inequality ``lhs <= rhs``."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CSV_FIELDS = ("bound_id", "anchor", "n", "lhs", "rhs", "slack", "lhs_se", "rhs_se", "verdict")
ABS_TOL = 1e-9

HOLDS, VACUOUS, VIOLATED = "holds", "vacuous", "violated"


def fmt(v) -> str:
    """Deterministic text for a report value (shortest round-trip repr)."""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class BoundReport:
    bound_id: str
    anchor: str
    n: int
    lhs: float
    rhs: float
    lhs_se: float = 0.0
    rhs_se: float = 0.0
    slack_se: float | None = None
    note: str = ""
    slack: float = field(init=False)
    verdict: str = field(init=False)

    def __post_init__(self):
        lhs, rhs = float(self.lhs), float(self.rhs)
        object.__setattr__(self, "lhs", lhs)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "slack", rhs - lhs if not (math.isinf(rhs) and math.isinf(lhs)) else math.nan)
        object.__setattr__(self, "verdict", self._classify())

    @property
    def combined_se(self) -> float:
        if self.slack_se is not None:
            return float(self.slack_se)
        return math.hypot(self.lhs_se, self.rhs_se)

    def _classify(self) -> str:
        if math.isinf(self.rhs) and self.rhs > 0:
            return VACUOUS
        if math.isnan(self.slack):
            return VIOLATED
        return VIOLATED if self.slack < -(3.0 * self.combined_se + ABS_TOL) else HOLDS

    @property
    def ok(self) -> bool:
        return self.verdict != VIOLATED

    def shifted(self, eps: float) -> "BoundReport":
        """Copy with ``eps`` added to the right side (used by failure-path fixtures)."""
        return BoundReport(self.bound_id, self.anchor, self.n, self.lhs, self.rhs + eps,
                           self.lhs_se, self.rhs_se, self.slack_se, self.note)

    def row(self) -> list[str]:
        return [fmt(getattr(self, f)) for f in CSV_FIELDS]


@dataclass(frozen=True)
class Estimate:
    """Point estimate with its standard error (0 for exact values)."""
    value: float
    se: float = 0.0
    trials: int = 0
    note: str = ""

    def __float__(self) -> float:
        return float(self.value)

    @classmethod
    def of(cls, samples, note: str = "") -> "Estimate":
        """Mean and standard error of i.i.d. trial values (compensated sum)."""
        v = np.asarray(samples, dtype=np.float64).ravel()
        m = math.fsum(v) / v.size
        if v.size < 2 or not math.isfinite(m):
            return cls(m, 0.0, int(v.size), note)  # no spread to report around an infinite mean
        se = math.sqrt(math.fsum((v - m) ** 2) / (v.size - 1) / v.size)
        return cls(m, se, int(v.size), note)
