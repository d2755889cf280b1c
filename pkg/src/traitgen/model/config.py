"""Model and trainer configuration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ModelConfig:
    """Desk-scale encoder-decoder transformer hyperparameters.

    Defaults are the desk configuration: batch size, patience and epoch
    count in TrainConfig mirror the full-scale recipe, everything else is
    scaled down to run on one CPU core.
    """

    d_model: int = 64
    n_heads: int = 4
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    ffn_dim: int = 128
    max_src_len: int = 256
    max_tgt_len: int = 40
    dropout_rate: float = 0.0
    seed: int = 0
    precision: int = 64  # float bits, 32 or 64

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.precision not in (32, 64):
            raise ValueError("precision must be 32 or 64")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    @property
    def dtype(self):
        return np.float64 if self.precision == 64 else np.float32


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    epochs: int = 15
    eval_steps: int = 200
    patience: int = 2
    learning_rate: float = 3e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
