"""Per-run trace shared by all solvers."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

CSV_COLUMNS = ("k", "calls", "gap", "walltime_ns")


class SolverError(RuntimeError):
    pass


@dataclass
class RunRecord:
    """Rows ``(k, calls, gap, walltime_ns)`` plus the final point.

    ``walltime_ns`` is zero unless timing was requested, so that traces of
    identical runs are byte-identical.
    """

    rows: List[Tuple[int, int, float, int]] = field(default_factory=list)
    x_final: Optional[np.ndarray] = None
    seed: Optional[int] = None
    config: dict = field(default_factory=dict)
    status: str = "running"
    extras: dict = field(default_factory=dict)

    def add(self, k: int, calls: int, gap: float, walltime_ns: int = 0):
        self.rows.append((int(k), int(calls), float(gap), int(walltime_ns)))

    @property
    def iterations(self) -> int:
        return self.rows[-1][0] if self.rows else 0

    @property
    def calls(self) -> int:
        return self.rows[-1][1] if self.rows else 0

    @property
    def final_gap(self) -> float:
        return self.rows[-1][2] if self.rows else float("nan")

    def first_reaching(self, eps: float) -> Optional[Tuple[int, int]]:
        """``(k, calls)`` of the first row with gap <= eps, or None."""
        for k, calls, gap, _ in self.rows:
            if gap <= eps:
                return k, calls
        return None

    def calls_to_eps(self, eps: float) -> Optional[int]:
        hit = self.first_reaching(eps)
        return None if hit is None else hit[1]

    def iterations_to_eps(self, eps: float) -> Optional[int]:
        hit = self.first_reaching(eps)
        return None if hit is None else hit[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for k, calls, gap, t in self.rows:
            w.writerow((k, calls, repr(float(gap)), t))
        return buf.getvalue()
