"""Per-round telemetry and run summaries shared by every learner."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

CSV_SCHEMA_VERSION = 1
ROUND_COLUMNS = ("t", "E_t", "shrink", "l1", "surrogate_loss", "exact_loss")


@dataclass(frozen=True)
class RoundRecord:
    t: int
    E_t: float
    shrink: bool
    y_t: float
    l1_after: float
    surrogate_loss: float
    exact_loss: Optional[float] = None


@dataclass
class RunSummary:
    algorithm: str
    records: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    wall_time: float = 0.0
    comparator_loss: Optional[float] = None
    comparator_norm: Optional[float] = None

    @property
    def T(self) -> int:
        return len(self.records)

    @property
    def cumulative_surrogate_loss(self) -> float:
        return math.fsum(r.surrogate_loss for r in self.records)

    @property
    def cumulative_exact_loss(self) -> Optional[float]:
        if any(r.exact_loss is None for r in self.records):
            return None
        return math.fsum(r.exact_loss for r in self.records)

    @property
    def regret(self) -> Optional[float]:
        exact = self.cumulative_exact_loss
        if exact is None or self.comparator_loss is None:
            return None
        return exact - self.comparator_loss

    @property
    def rho(self) -> Optional[float]:
        """Mean wall time per sampled feature parameter, in seconds."""
        n = self.counters.get("weight_samples", 0)
        if not n:
            return None
        return self.counters.get("sample_seconds", 0.0) / n

    def to_dict(self, include_records: bool = False) -> dict:
        out = {
            "schema_version": CSV_SCHEMA_VERSION,
            "algorithm": self.algorithm,
            "T": self.T,
            "cumulative_surrogate_loss": self.cumulative_surrogate_loss,
            "cumulative_exact_loss": self.cumulative_exact_loss,
            "comparator_loss": self.comparator_loss,
            "comparator_norm": self.comparator_norm,
            "regret": self.regret,
            "counters": {k: v for k, v in self.counters.items() if k != "sample_seconds"},
            "rho_seconds_per_sample": self.rho,
            "wall_time": self.wall_time,
        }
        if include_records:
            out["records"] = [asdict(r) for r in self.records]
        return out

    def to_csv(self) -> str:
        """Per-round CSV text with full round-trip precision for reals."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(ROUND_COLUMNS)
        for r in self.records:
            writer.writerow(
                [
                    r.t,
                    repr(float(r.E_t)),
                    int(r.shrink),
                    repr(float(r.l1_after)),
                    repr(float(r.surrogate_loss)),
                    "" if r.exact_loss is None else repr(float(r.exact_loss)),
                ]
            )
        return buf.getvalue()


def read_rounds_csv(text: str) -> list:
    """Parse per-round CSV text, checking the header against the schema."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != ROUND_COLUMNS:
        raise ValueError(f"unexpected round CSV header: {rows[0] if rows else None}")
    out = []
    for row in rows[1:]:
        t, e, shrink, l1, sur, ex = row
        out.append(
            {
                "t": int(t),
                "E_t": float(e),
                "shrink": bool(int(shrink)),
                "l1": float(l1),
                "surrogate_loss": float(sur),
                "exact_loss": None if ex == "" else float(ex),
            }
        )
    return out
