"""Dataclass configs with JSON round-trip and dotted-key overrides."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path


@dataclass
class LossConfig:
    lambda_ssim: float = 0.2
    lambda_01: float = 0.001
    lambda_n: float = 0.1
    lambda_nosh: float = 2.0     # weight of the no-SH photometric regularizer
    gamma: float = 10.0          # contrast weight of the normal smoothness term

    def validate(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"loss weight {f.name} must be >= 0")


@dataclass
class UvTrainConfig:
    steps: int = 10000
    lr: float = 1e-3
    n_depth_pool: int = 65536    # back-projected surface-point pool, redrawn per epoch
    batch_points: int = 2048     # per-step minibatch from the pool
    n_uv: int = 4096             # fresh area-uniform UV samples per step
    n_pseudo: int = 8192         # farthest-point pseudo-GT cloud size (capped at N)
    epoch_steps: int = 16
    seed: int = 0


@dataclass
class TrainConfig:
    stage1_iters: int = 30000
    reg_start: int = 2000
    prune_every: int = 6000
    flatten_every: int = 1000
    flatten_value: float = -20.0   # log-scale reset of the shortest axis
    prune_threshold: float = 0.5
    stage3_texture_only: int = 10000
    stage3_joint: int = 30000
    lr_position: float = 1.6e-4    # scaled by scene extent
    lr_quat: float = 1e-3
    lr_scale: float = 5e-3
    lr_opacity: float = 5e-2
    lr_sh: float = 2.5e-3
    lr_texture: float = 1e-2
    texture_height: int = 256
    texture_width: int = 512
    n_init_gaussians: int = 4000
    init_opacity: float = 0.7
    seed: int = 0
    deterministic: bool = True
    loss: LossConfig = field(default_factory=LossConfig)
    uv: UvTrainConfig = field(default_factory=UvTrainConfig)

    def validate(self):
        for name in ("stage1_iters", "reg_start", "prune_every", "flatten_every",
                     "stage3_texture_only", "stage3_joint"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 < self.prune_threshold < 1.0:
            raise ValueError("prune_threshold must lie in (0, 1)")
        self.loss.validate()


def _to_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


def _from_dict(cls, data: dict, path: str = ""):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        here = f"{path}.{key}" if path else key
        if key not in known:
            raise KeyError(f"unknown config key: {here}")
        f = known[key]
        if dataclasses.is_dataclass(f.type) or f.name in ("loss", "uv"):
            sub_cls = {"loss": LossConfig, "uv": UvTrainConfig}[f.name]
            kwargs[key] = _from_dict(sub_cls, value, here)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def load_config(path) -> TrainConfig:
    data = json.loads(Path(path).read_text())
    cfg = _from_dict(TrainConfig, data)
    cfg.validate()
    return cfg


def save_config(cfg: TrainConfig, path) -> None:
    Path(path).write_text(json.dumps(_to_dict(cfg), indent=2, sort_keys=True) + "\n")


def apply_overrides(cfg: TrainConfig, overrides: dict[str, str]) -> TrainConfig:
    """Apply dotted-key overrides like ``{"loss.lambda_nosh": "0"}``."""
    data = _to_dict(cfg)
    for dotted, raw in overrides.items():
        parts = dotted.split(".")
        node = data
        for p in parts[:-1]:
            if p not in node:
                raise KeyError(f"unknown config key: {dotted}")
            node = node[p]
        leaf = parts[-1]
        if leaf not in node:
            raise KeyError(f"unknown config key: {dotted}")
        old = node[leaf]
        if isinstance(old, bool):
            node[leaf] = raw in ("1", "true", "True")
        elif isinstance(old, int):
            node[leaf] = int(raw)
        elif isinstance(old, float):
            node[leaf] = float(raw)
        else:
            node[leaf] = raw
    cfg = _from_dict(TrainConfig, data)
    cfg.validate()
    return cfg


def resolved_json(cfg: TrainConfig) -> str:
    return json.dumps(_to_dict(cfg), indent=2, sort_keys=True)
