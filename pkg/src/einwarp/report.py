"""Named residual reports with pass/fail flags against tolerances.

A report maps check names to sup-norm residuals measured over some sample
grid.  The pass flag is always ``residual <= tolerance`` by construction.
Reports serialize to JSON and to flat CSV rows (name, residual, tolerance,
pass).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field


@dataclass
class CheckResult:
    residual: float
    tolerance: float
    passed: bool
    grid: str = ""

    def to_dict(self) -> dict:
        return {
            "residual": self.residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "grid": self.grid,
        }


@dataclass
class ResidualReport:
    """Collection of named residual checks plus free-form metadata."""

    checks: dict[str, CheckResult] = field(default_factory=dict)
    meta: dict[str, object] = field(default_factory=dict)

    def add(self, name: str, residual: float, tolerance: float, grid: str = "") -> CheckResult:
        residual = float(residual)
        if math.isnan(residual):
            raise ValueError(f"residual for {name!r} is NaN")
        result = CheckResult(residual, float(tolerance), residual <= tolerance, grid)
        self.checks[name] = result
        return result

    def merge(self, other: "ResidualReport", prefix: str = "") -> "ResidualReport":
        for name, res in other.checks.items():
            self.checks[prefix + name] = res
        for key, val in other.meta.items():
            self.meta.setdefault(key, val)
        return self

    def all_pass(self) -> bool:
        return all(r.passed for r in self.checks.values())

    def failing(self) -> list[str]:
        return [name for name, r in self.checks.items() if not r.passed]

    def worst(self) -> tuple[str, float]:
        """Check with the largest residual/tolerance ratio."""
        name = max(self.checks, key=lambda k: self.checks[k].residual / self.checks[k].tolerance)
        return name, self.checks[name].residual

    def tolerances(self) -> dict[str, float]:
        return {name: r.tolerance for name, r in self.checks.items()}

    def to_dict(self) -> dict:
        return {
            "checks": {name: r.to_dict() for name, r in self.checks.items()},
            "meta": self.meta,
            "all_pass": self.all_pass(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), default=_jsonable, **kwargs)

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json(indent=2))
            fh.write("\n")

    def csv_rows(self) -> list[list]:
        rows = [["check", "residual", "tolerance", "pass"]]
        for name, r in self.checks.items():
            rows.append([name, f"{r.residual:.6e}", f"{r.tolerance:.1e}", int(r.passed)])
        return rows

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.csv_rows())

    def __str__(self) -> str:
        lines = []
        for name, r in self.checks.items():
            tag = "pass" if r.passed else "FAIL"
            lines.append(f"[{tag}] {name}: residual {r.residual:.3e} (tol {r.tolerance:.1e})")
        return "\n".join(lines)


def _jsonable(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if hasattr(obj, "item"):
        return obj.item()
    return str(obj)
