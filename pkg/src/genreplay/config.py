"""Hyperparameters shared by every pipeline."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class TrainConfig:
    hidden_dim: int = 64
    embed_dim: int = 64
    batch_size: int = 64
    lr: float = 0.05  # plain descent: pretraining, generation refresh, baselines
    pretrain_epochs: int = 50
    epochs: int = 20  # replay / baseline retraining epochs per step
    gen_epochs: int = 1  # refresh pass on gold + lookback before clustering
    plateau_tol: float = 1e-4
    # generation
    cluster_iters: int = 10
    cluster_tol: float = 1e-3  # stop when fewer than this fraction of labels change
    ils_weight: float = 0.1
    label_energy: float = 0.9
    lookback: int = 100
    pl_conf_size: int = 100
    # replay
    eta1: float = 0.01
    eta2: float = 0.01
    subspace_energy: float = 0.9
    subspace_rows: int = 512
    flat_region: bool = True
    # mean teacher (off when mt_weight == 0)
    mt_weight: float = 0.0
    mt_momentum: float = 0.99

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))
