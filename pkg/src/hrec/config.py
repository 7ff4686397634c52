"""Training configuration and its JSON/flag parsing."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    # embedding widths: segment (SegNet output), video context, GRU hidden
    sfd: int = 256
    vd: int = 256
    d_h: int = 256
    gru_layers: int = 1
    kernel_size: int = 3
    # self-supervision: shuffle ratio and task weight
    alpha: float = 0.02
    beta: float = 1.0
    # portion-averaging augmentation (1 = off)
    portions: int = 1
    augment_at_inference: bool = False
    dropout_p: float = 0.0
    lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 30
    seed: int = 0
    n_s: int = 6
    normalize_targets: bool = True

    def __post_init__(self):
        for name in ("sfd", "vd", "d_h", "gru_layers", "kernel_size", "portions", "n_s"):
            _require(name, getattr(self, name), isinstance(getattr(self, name), int) and getattr(self, name) >= 1, ">= 1 (integer)")
        _require("epochs", self.epochs, isinstance(self.epochs, int) and self.epochs >= 0, ">= 0 (integer)")
        _require("seed", self.seed, isinstance(self.seed, int) and self.seed >= 0, ">= 0 (integer)")
        _require("alpha", self.alpha, 0 <= self.alpha <= 1, "in [0, 1]")
        _require("beta", self.beta, self.beta >= 0, ">= 0")
        _require("dropout_p", self.dropout_p, 0 <= self.dropout_p < 1, "in [0, 1)")
        _require("lr", self.lr, self.lr >= 0, ">= 0")
        _require("adam_beta1", self.adam_beta1, 0 <= self.adam_beta1 < 1, "in [0, 1)")
        _require("adam_beta2", self.adam_beta2, 0 <= self.adam_beta2 < 1, "in [0, 1)")
        _require("adam_eps", self.adam_eps, self.adam_eps > 0, "> 0")
        _require("portions", self.portions, self.portions <= self.sfd, f"<= sfd ({self.sfd})")

    def replace(self, **changes: Any) -> TrainConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> TrainConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - names)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**values)


def _require(name: str, value, ok: bool, bounds: str) -> None:
    if not ok:
        raise ConfigError(f"{name}={value!r} out of range: must be {bounds}")


def parse_config(path: str | Path | None = None, overrides: dict | None = None) -> TrainConfig:
    """Defaults, then the flat JSON file at ``path``, then non-None ``overrides``."""
    values: dict = {}
    if path is not None:
        loaded = json.loads(Path(path).read_text())
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a flat JSON object")
        values.update(loaded)
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    return TrainConfig.from_dict(values)
