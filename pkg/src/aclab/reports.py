"""Check reports shared by the diagnostic modules."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PASS = "PASS"
FAIL = "FAIL"
NA = "N-A"


def fmt(x) -> str:
    """17 significant digits for floats, plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, (np.ndarray, list, tuple)):
        return " ".join(fmt(v) for v in x)
    if x is None:
        return ""
    return str(x)


@dataclass
class Report:
    """Outcome of one check: per-row data, a verdict and the worst slack.

    ``worst_slack`` is signed so that a negative value is a violation.
    """

    check: str
    result: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    status: str = PASS
    worst_slack: float = float("inf")
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([fmt(v) for v in row])


def verdict_from_slacks(slacks: Sequence[float], tol: float = 0.0) -> tuple[str, float]:
    slacks = [s for s in slacks if s is not None and np.isfinite(s)]
    if not slacks:
        return NA, float("nan")
    worst = float(min(slacks))
    return (PASS if worst >= -tol else FAIL), worst
