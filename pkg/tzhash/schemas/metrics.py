"""
Metrics records written as JSON lines.
"""

import math
from typing import Dict, Optional

from pydantic import BaseModel, field_validator


class LossBreakdown(BaseModel):
    """Loss components of one step (or the mean over an epoch)."""

    coarse: float
    fine: float
    hash: float
    total: float


class MetricsRecord(BaseModel):
    """Per-epoch training record."""

    epoch: int
    step: int
    losses: LossBreakdown
    map: Optional[float] = None
    precision_at_radius: Optional[float] = None
    coarse_precision: Optional[float] = None
    wall_time: Optional[float] = None

    @field_validator("map", "precision_at_radius", "coarse_precision", "wall_time")
    @classmethod
    def finite(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not math.isfinite(v):
            raise ValueError("metrics must be finite")
        return v

    def to_line(self) -> str:
        return self.model_dump_json(exclude_none=True)


class MetricLine(BaseModel):
    """One evaluation result: ``{metric, bits, value}``."""

    metric: str
    bits: int
    value: float

    def to_line(self) -> str:
        return self.model_dump_json()


class BenchmarkLine(MetricLine):
    """A MetricLine from a benchmark sweep, tagged with the varied SynthSpec field and its value."""

    factor: str
    level: int


class GradCheckReport(BaseModel):
    """Max relative error between analytic and central-difference gradients, per parameter."""

    errors: Dict[str, float]
    tol: float

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tol
