"""
Experiment configuration schemas.

Both configs are read from flat ``key=value`` files (see ``tzhash.config``); every field
below is a valid key.
"""

import math
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _split_list(v):
    if isinstance(v, str):
        return [item.strip() for item in v.split(",") if item.strip()]
    return v


class BackboneConfig(BaseModel):
    """Layer widths of the shared MLP; the last width is the representation dim d_f."""

    d_in: int = Field(..., ge=1)
    widths: List[int] = Field(default_factory=lambda: [64, 32], min_length=1)

    @field_validator("widths")
    @classmethod
    def widths_positive(cls, v: List[int]) -> List[int]:
        if any(w < 1 for w in v):
            raise ValueError("all layer widths must be >= 1")
        return v

    @property
    def d_f(self) -> int:
        return self.widths[-1]


class TrainConfig(BaseModel):
    """Joint training configuration."""

    model_config = ConfigDict(extra="forbid")

    # batch geometry
    source_batch: int = Field(128, ge=1)
    unlabeled_batch: int = Field(256, ge=1)
    groups: int = Field(32, ge=1)
    n_novel: Optional[int] = Field(None, ge=1)

    # network
    code_bits: int = Field(32, ge=1)
    backbone_widths: List[int] = Field(default_factory=lambda: [64, 32], min_length=1)

    # optimization
    lr: float = Field(0.01, ge=0.0)
    epochs: int = Field(50, ge=0)
    warmup_steps: int = Field(0, ge=0)
    lambda_coarse: float = Field(1.0, ge=0.0)
    lambda_fine: float = Field(1.0, ge=0.0)
    lambda_hash: float = Field(1.0, ge=0.0)

    # pair labelling
    margin: Optional[float] = Field(None, gt=0.0)
    tau_sim: Optional[int] = Field(None, ge=0)
    tau_dis: Optional[int] = Field(None, ge=0)

    mine_targets: bool = True
    eval_radius: int = Field(2, ge=0)
    seed: int = Field(0, ge=0)

    @field_validator("backbone_widths", mode="before")
    @classmethod
    def parse_widths(cls, v):
        return _split_list(v)

    @field_validator("n_novel", "margin", "tau_sim", "tau_dis", mode="before")
    @classmethod
    def blank_is_unset(cls, v):
        if isinstance(v, str) and not v.strip():
            return None
        return v

    @model_validator(mode="after")
    def check_geometry(self) -> "TrainConfig":
        if self.unlabeled_batch % self.groups != 0:
            raise ValueError(
                f"unlabeled_batch ({self.unlabeled_batch}) must be divisible by groups ({self.groups})"
            )
        lo, hi, l = self.effective_tau_sim, self.effective_tau_dis, self.code_bits
        if not (0 <= lo <= hi <= l):
            raise ValueError(f"need 0 <= tau_sim <= tau_dis <= code_bits, got {lo}, {hi}, {l}")
        if any(w < 1 for w in self.backbone_widths):
            raise ValueError("all layer widths must be >= 1")
        return self

    # unset margin / thresholds follow the code length

    @property
    def effective_margin(self) -> float:
        return 2.0 * self.code_bits if self.margin is None else self.margin

    @property
    def effective_tau_sim(self) -> int:
        return math.floor(0.25 * self.code_bits) if self.tau_sim is None else self.tau_sim

    @property
    def effective_tau_dis(self) -> int:
        return math.ceil(0.5 * self.code_bits) if self.tau_dis is None else self.tau_dis

    @property
    def group_size(self) -> int:
        return self.unlabeled_batch // self.groups

    def backbone(self, d_in: int) -> BackboneConfig:
        return BackboneConfig(d_in=d_in, widths=self.backbone_widths)


class SynthSpec(BaseModel):
    """Synthetic zero-shot benchmark parameters."""

    model_config = ConfigDict(extra="forbid")

    n_seen: int = Field(8, ge=2)
    n_novel: int = Field(2, ge=1)
    d_in: int = Field(32, ge=1)
    sigma_between: float = Field(3.0, ge=0.0)
    sigma_within: float = Field(1.0, gt=0.0)
    word_dim: int = Field(50, ge=2)
    # target cosine between novel class k and its paired seen class
    rho: List[float] = Field(default_factory=lambda: [0.8])
    pairing: Optional[List[int]] = None
    # how far each novel mean moves toward its paired seen mean, scaled by rho
    feature_alignment: float = Field(1.0, ge=0.0, le=1.0)

    n_source: int = Field(800, ge=1)
    n_unlabeled: int = Field(1600, ge=1)
    n_queries: int = Field(200, ge=1)
    unlabeled_novel_fraction: float = Field(0.5, ge=0.0, le=1.0)
    seed: int = Field(0, ge=0)

    @field_validator("rho", "pairing", mode="before")
    @classmethod
    def parse_lists(cls, v):
        if isinstance(v, str) and not v.strip():
            return None
        return _split_list(v)

    @model_validator(mode="after")
    def check_structure(self) -> "SynthSpec":
        if len(self.rho) == 1:
            self.rho = self.rho * self.n_novel
        if len(self.rho) != self.n_novel:
            raise ValueError(f"rho needs 1 or {self.n_novel} entries, got {len(self.rho)}")
        if any(not 0.0 <= r <= 1.0 for r in self.rho):
            raise ValueError("rho entries must lie in [0, 1]")
        if self.pairing is None:
            self.pairing = [k % self.n_seen for k in range(self.n_novel)]
        if len(self.pairing) != self.n_novel or any(not 0 <= p < self.n_seen for p in self.pairing):
            raise ValueError("pairing must name one seen class per novel class")
        if self.word_dim < self.n_seen + self.n_novel:
            raise ValueError("word_dim must be at least n_seen + n_novel")
        return self
