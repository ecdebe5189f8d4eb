"""Model configuration and parameter layout."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .nn import Parameters, glorot_uniform, recurrent_init

ENCODERS = ("seq+gnn", "seq", "gnn")
READOUTS = ("gated", "average")


@dataclass(frozen=True)
class GnnConfig:
    hidden_dim: int = 128
    timesteps: int = 8
    edge_types: int = 1  # declared K; propagation uses 2K (forward + reverse)

    def __post_init__(self):
        if self.timesteps < 0 or self.hidden_dim <= 0 or self.edge_types < 1:
            raise ValueError("GnnConfig needs timesteps >= 0, hidden_dim > 0, edge_types >= 1")

    @property
    def effective_edge_types(self) -> int:
        return 2 * self.edge_types


@dataclass(frozen=True)
class ModelConfig:
    """Sizes and variants of the encoder-decoder.

    ``encoder_hidden`` is per direction, so the bidirectional output is twice
    as wide.  ``encoder`` selects the full hybrid (``"seq+gnn"``), the plain
    sequence encoder (``"seq"``) or the graph-only encoder (``"gnn"``).
    """

    vocab_size: int
    edge_types: int
    embedding_dim: int = 128
    encoder_hidden: int = 128
    gnn_hidden: int = 128
    timesteps: int = 8
    decoder_hidden: int = 256
    encoder: str = "seq+gnn"
    readout: str = "gated"
    copy: bool = True

    def __post_init__(self):
        if self.encoder not in ENCODERS:
            raise ValueError(f"encoder must be one of {ENCODERS}")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}")

    @property
    def gnn(self) -> GnnConfig:
        return GnnConfig(self.gnn_hidden, self.timesteps, self.edge_types)

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def parameter_shapes(cfg: ModelConfig) -> dict:
    v, e, he, h, hd = cfg.vocab_size, cfg.embedding_dim, cfg.encoder_hidden, cfg.gnn_hidden, cfg.decoder_hidden
    k_eff = 2 * cfg.edge_types
    return {
        "embed.token": (v, e),
        "embed.node": (v, h),
        "encoder.fwd.W": (e + he, 4 * he),
        "encoder.fwd.b": (4 * he,),
        "encoder.bwd.W": (e + he, 4 * he),
        "encoder.bwd.b": (4 * he,),
        "gnn.seed.W": (2 * he, h),
        "gnn.seed.b": (h,),
        "gnn.edge.W": (h, k_eff * h),
        "gnn.edge.b": (k_eff, h),
        "gnn.gru.W": (h, 3 * h),
        "gnn.gru.U": (h, 3 * h),
        "gnn.gru.b": (3 * h,),
        "readout.gate.W": (h, 1),
        "readout.gate.b": (1,),
        "readout.proj.W": (h, h),
        "readout.proj.b": (h,),
        "fuse.W": (2 * he + h, hd),
        "decoder.lstm.W": (e + h + hd, 4 * hd),
        "decoder.lstm.b": (4 * hd,),
        "decoder.attn.W": (h, hd),
        "decoder.out.W": (hd + h, v),
        "decoder.out.b": (v,),
        "decoder.gen.W": (h + hd + e + h, 1),
        "decoder.gen.b": (1,),
    }


def init_parameters(cfg: ModelConfig, seed: int = 0, dtype=np.float32) -> Parameters:
    """Glorot-uniform weights, orthogonal recurrent blocks, zero biases and a
    forget-gate bias of one."""
    rng = np.random.default_rng(seed)
    params = Parameters(parameter_shapes(cfg), dtype=dtype)
    for name, shape in params.shapes.items():
        if name.endswith(".b"):
            continue
        if name == "gnn.edge.W":
            h = cfg.gnn_hidden
            params[name] = np.concatenate([glorot_uniform(rng, (h, h)) for _ in range(2 * cfg.edge_types)], axis=1)
        else:
            params[name] = glorot_uniform(rng, shape)
    he, hd, h, e = cfg.encoder_hidden, cfg.decoder_hidden, cfg.gnn_hidden, cfg.embedding_dim
    for side in ("fwd", "bwd"):
        params[f"encoder.{side}.W"][e:] = recurrent_init(rng, he, 4)
        params[f"encoder.{side}.b"][he : 2 * he] = 1.0
    params["decoder.lstm.W"][e + h :] = recurrent_init(rng, hd, 4)
    params["decoder.lstm.b"][hd : 2 * hd] = 1.0
    params["gnn.gru.U"] = recurrent_init(rng, h, 3)
    return params
