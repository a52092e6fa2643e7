"""Check records and reports shared by every suite."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field


@dataclass(frozen=True)
class Config:
    samples: int = 20
    tol: float = 1e-7
    seed: int | None = None
    fd_fallback: bool = True
    fd_tol: float = 1e-5
    fd_step: float = 1e-5
    node_budget: int = 2_000_000
    rank_tol: float = 1e-9
    identity_tol: float = 1e-8
    exact_tol: float = 1e-9


@dataclass(frozen=True)
class CheckRecord:
    name: str
    anchor: str
    samples: int
    max_residual: float
    tolerance: float
    passed: bool
    notes: str = ""

    def as_dict(self) -> dict:
        d = asdict(self)
        for key in ("max_residual", "tolerance"):
            if not math.isfinite(d[key]):
                d[key] = None
        return d

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        note = f"  [{self.notes}]" if self.notes else ""
        return (
            f"{status}  {self.name}  residual={self.max_residual:.3e}  tol={self.tolerance:.1e}"
            f"  samples={self.samples}  ({self.anchor}){note}"
        )


def check(
    name: str,
    anchor: str,
    residual: float,
    tolerance: float,
    samples: int,
    notes: str = "",
    invalid: int = 0,
) -> CheckRecord:
    """Build a record; non-finite residuals and domain-violating samples fail."""
    extra = f"domain violations at {invalid} sample(s)" if invalid else ""
    notes = "; ".join(x for x in (notes, extra) if x)
    ok = math.isfinite(residual) and residual < tolerance and invalid == 0 and samples > 0
    return CheckRecord(name, anchor, samples, float(residual), float(tolerance), bool(ok), notes)


@dataclass
class Report:
    command: str
    target: str
    config: Config
    records: list[CheckRecord] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add(self, rec: CheckRecord | list[CheckRecord]) -> None:
        if isinstance(rec, CheckRecord):
            self.records.append(rec)
        else:
            self.records.extend(rec)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "target": self.target,
            "config": asdict(self.config),
            "passed": self.passed,
            "records": [r.as_dict() for r in self.records],
            **({"result": self.extra} if self.extra else {}),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)

    def to_text(self) -> str:
        cfg = ", ".join(f"{k}={v}" for k, v in sorted(asdict(self.config).items()))
        lines = [f"{self.command} {self.target}", f"config: {cfg}"]
        lines += [r.line() for r in self.records]
        lines.append("OVERALL " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)
