"""Pass/fail records for residual checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TOL_ANALYTIC = 1e-10
TOL_FD = 1e-6
TOL_DRIFT = 1e-8

REPORT_KEYS = ("name", "tolerance", "max_residual", "rms_residual", "samples", "convergence", "pass")


@dataclass(frozen=True)
class ConservationReport:
    """Residual statistics of one check; ``passed`` iff ``max_residual <= tolerance``."""

    name: str
    tolerance: float
    max_residual: float
    rms_residual: float
    samples: int
    convergence: tuple[float, ...] = ()
    residuals: np.ndarray | None = field(default=None, repr=False, compare=False)
    skipped: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.max_residual < 0 or self.rms_residual < 0:
            raise ValueError("residuals must be non-negative")
        object.__setattr__(self, "convergence", tuple(float(c) for c in self.convergence))

    @property
    def passed(self) -> bool:
        return bool(self.max_residual <= self.tolerance)

    def fails_clearly(self, margin: float = 10.0) -> bool:
        """Negative-control verdict: residual above ``margin`` times the tolerance."""
        return bool(self.max_residual > margin * self.tolerance)

    @classmethod
    def from_residuals(cls, name: str, residuals: Iterable[float], tolerance: float,
                       convergence: Sequence[float] = (), skipped: int = 0) -> "ConservationReport":
        r = np.abs(np.asarray(list(residuals) if not isinstance(residuals, np.ndarray) else residuals,
                              dtype=float)).ravel()
        if r.size and not np.all(np.isfinite(r)):
            mx = rms = math.inf
        elif r.size:
            mx, rms = float(np.max(r)), float(np.sqrt(np.mean(r**2)))
        else:
            mx = rms = 0.0
        return cls(name, float(tolerance), mx, rms, int(r.size), tuple(convergence), r, skipped)

    def with_convergence(self, ratios: Sequence[float]) -> "ConservationReport":
        return ConservationReport(self.name, self.tolerance, self.max_residual, self.rms_residual, self.samples,
                                  tuple(ratios), self.residuals, self.skipped)

    def renamed(self, name: str) -> "ConservationReport":
        return ConservationReport(name, self.tolerance, self.max_residual, self.rms_residual, self.samples,
                                  self.convergence, self.residuals, self.skipped)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "tolerance": self.tolerance,
            "max_residual": _finite(self.max_residual),
            "rms_residual": _finite(self.rms_residual),
            "samples": self.samples,
            "convergence": [_finite(c) for c in self.convergence],
            "pass": self.passed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ConservationReport":
        if set(data) != set(REPORT_KEYS):
            raise ValueError(f"report keys {sorted(data)} differ from {sorted(REPORT_KEYS)}")
        rep = cls(data["name"], float(data["tolerance"]), _unfinite(data["max_residual"]),
                  _unfinite(data["rms_residual"]), int(data["samples"]),
                  tuple(_unfinite(c) for c in data["convergence"]))
        if rep.passed != bool(data["pass"]):
            raise ValueError("pass flag inconsistent with residual and tolerance")
        return rep

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        conv = f"  ratios={','.join(f'{c:.3f}' for c in self.convergence)}" if self.convergence else ""
        return f"{verdict}  {self.name}: max={self.max_residual:.3e} tol={self.tolerance:.1e} n={self.samples}{conv}"


def _finite(x: float):
    # JSON has no inf/nan; encode them as strings
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def _unfinite(x) -> float:
    return float(x)


def convergence_ratios(values: Sequence[float]) -> list[float]:
    """Successive ratios ``r(h) / r(h/2)``; 4 for second-order error."""
    out = []
    for a, b in zip(values[:-1], values[1:]):
        out.append(a / b if b > 0 else math.inf)
    return out


__all__ = [
    "ConservationReport",
    "REPORT_KEYS",
    "TOL_ANALYTIC",
    "TOL_DRIFT",
    "TOL_FD",
    "convergence_ratios",
]
