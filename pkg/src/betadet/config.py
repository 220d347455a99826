"""Run configuration: plain-text ``key = value`` lines.

Blank lines and lines starting with ``#`` are ignored; unknown keys are
rejected so typos in weight names cannot silently fall back to defaults.
The field set below is the single source of every default, including the
matching-cost and loss weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .assignment import CostWeights
from .losses import LossWeights
from .model import ModelConfig

_MASK64 = (1 << 64) - 1


@dataclass
class RunConfig:
    seed: int = 1
    data_dir: str = ""
    image_size: int = 64
    patch: int = 8
    embed_dim: int = 64
    heads: int = 4
    num_queries: int = 12
    decoder_layers: int = 2
    mlp_ratio: int = 2
    match_lambda_cls: float = 2.0
    match_lambda_l1: float = 5.0
    match_lambda_giou: float = 2.0
    match_lambda_mat: float = 1.0
    loss_lambda_vfl: float = 1.0
    loss_lambda_bbox: float = 5.0
    loss_lambda_giou: float = 2.0
    loss_lambda_maturity: float = 1.0
    loss_lambda_reg: float = 1e-3
    lr: float = 1e-3
    batch_size: int = 8
    steps: int = 3000

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not (0 <= self.seed <= _MASK64):
            raise ValueError("seed must fit in 64 bits")
        if self.lr <= 0 or not math.isfinite(self.lr):
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        # Delegate range checks on the composite structures.
        self.model_config()
        self.cost_weights()
        self.loss_weights()

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            image_size=self.image_size, patch=self.patch,
            embed_dim=self.embed_dim, heads=self.heads,
            num_queries=self.num_queries, decoder_layers=self.decoder_layers,
            mlp_ratio=self.mlp_ratio)

    def cost_weights(self) -> CostWeights:
        return CostWeights(
            lambda_cls=self.match_lambda_cls, lambda_l1=self.match_lambda_l1,
            lambda_giou=self.match_lambda_giou, lambda_mat=self.match_lambda_mat)

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            lambda_vfl=self.loss_lambda_vfl, lambda_bbox=self.loss_lambda_bbox,
            lambda_giou=self.loss_lambda_giou,
            lambda_maturity=self.loss_lambda_maturity,
            lambda_reg=self.loss_lambda_reg)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse config text over defaults (or over `base` when given)."""
    values = {f.name: getattr(base, f.name) for f in fields(RunConfig)} if base \
        else {}
    cfg = RunConfig(**values) if values else RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        ftype = _FIELD_TYPES[key]
        try:
            if ftype in ("int", int):
                value = int(raw)
            elif ftype in ("float", float):
                value = float(raw)
            else:
                value = raw
        except ValueError:
            raise ValueError(
                f"config line {lineno}: cannot parse {raw!r} for key {key!r}") from None
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


def config_text(cfg: RunConfig) -> str:
    """Canonical echo: every field, declaration order, ``key = value``."""
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        shown = f"{v:.9g}" if isinstance(v, float) else str(v)
        lines.append(f"{f.name} = {shown}")
    return "\n".join(lines) + "\n"


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path, "r") as f:
        return parse_config(f.read(), base=base)
