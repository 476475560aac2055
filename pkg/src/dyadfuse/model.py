"""The trainable fusion network.

Gated speaker frames and listener frames are encoded by two bidirectional
LSTMs; a learned listener-identity embedding is broadcast-concatenated onto
every listener frame. Four multi-head attention blocks then produce
fixed-length encodings by mean-pooling over the query axis:

  h_s      : attention within the speaker sequence
  h_l      : attention within the listener sequence
  h_s_to_l : listener queries attending over speaker keys/values
  h_l_to_s : speaker queries attending over listener keys/values

The concatenated encodings feed a 16-unit ReLU layer with dropout and two
parallel linear heads emitting one (competence, warmth) pair per window.

All tensors are float64; initialization is fully determined by the config
seed, and dropout draws from a caller-supplied generator so training runs are
reproducible.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch
from torch import nn

from .errors import ConfigError, InputShapeError
from .seeding import derive_seed

DTYPE = torch.float64


@dataclass
class ModelConfig:
    speaker_dim: int = 412
    listener_dim: int = 68
    n_listeners: int = 40
    blstm_hidden: int = 32   # per direction; encoder output is twice this
    id_embed_dim: int = 64
    d_model: int = 64
    heads: int = 16
    fc_hidden: int = 16
    dropout_p: float = 0.5
    seed: int = 0
    use_listener_id: bool = True
    use_intra_attention: bool = True
    use_inter_attention: bool = True

    def validate(self) -> None:
        if self.d_model % self.heads != 0:
            raise ConfigError(
                f"d_model={self.d_model} must be divisible by heads={self.heads}"
            )
        for name in ("speaker_dim", "listener_dim", "n_listeners", "blstm_hidden",
                     "id_embed_dim", "d_model", "heads", "fc_hidden"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if not (self.use_intra_attention or self.use_inter_attention):
            raise ConfigError("at least one attention branch must be enabled")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads

    @property
    def n_branches(self) -> int:
        return 2 * int(self.use_intra_attention) + 2 * int(self.use_inter_attention)


@dataclass
class EncodingQuad:
    """The pooled encodings; entries are None when their branch is disabled."""

    h_s: Optional[torch.Tensor] = None
    h_l: Optional[torch.Tensor] = None
    h_s_to_l: Optional[torch.Tensor] = None
    h_l_to_s: Optional[torch.Tensor] = None


@dataclass
class ForwardTrace:
    """Outputs of one forward pass over a batch of equal-length windows."""

    quad: EncodingQuad
    c_p: torch.Tensor
    w_p: torch.Tensor
    attention: Optional[dict] = None


def one_hot(index: int, n: int) -> np.ndarray:
    """Length-n indicator vector with a single 1 at ``index``."""
    if not 0 <= index < n:
        raise IndexError(f"index {index} out of range for one-hot of size {n}")
    vec = np.zeros(n)
    vec[index] = 1.0
    return vec


class MultiHeadAttention(nn.Module):
    """Scaled dot-product attention with per-head projections and an output map.

    Heads are stored stacked: column block i of each projection weight is the
    per-head matrix W_i. Projections carry no bias.
    """

    def __init__(self, q_dim: int, kv_dim: int, d_model: int, heads: int):
        super().__init__()
        if d_model % heads != 0:
            raise ConfigError(f"d_model={d_model} not divisible by heads={heads}")
        self.heads = heads
        self.d_model = d_model
        self.head_dim = d_model // heads
        self.w_q = nn.Linear(q_dim, d_model, bias=False, dtype=DTYPE)
        self.w_k = nn.Linear(kv_dim, d_model, bias=False, dtype=DTYPE)
        self.w_v = nn.Linear(kv_dim, d_model, bias=False, dtype=DTYPE)
        self.w_o = nn.Linear(d_model, d_model, bias=False, dtype=DTYPE)

    def forward(self, q_seq, k_seq, v_seq, return_weights: bool = False):
        if q_seq.dim() != 3 or k_seq.dim() != 3 or v_seq.dim() != 3:
            raise InputShapeError("attention inputs must be (batch, time, dim)")
        if k_seq.shape[:2] != v_seq.shape[:2]:
            raise InputShapeError(
                f"key/value lengths differ: {tuple(k_seq.shape)} vs {tuple(v_seq.shape)}"
            )
        b, t_q, _ = q_seq.shape
        t_k = k_seq.shape[1]

        def split(x, t):
            return x.view(b, t, self.heads, self.head_dim).transpose(1, 2)

        q = split(self.w_q(q_seq), t_q)
        k = split(self.w_k(k_seq), t_k)
        v = split(self.w_v(v_seq), t_k)
        scores = q @ k.transpose(-2, -1) / (self.head_dim**0.5)
        attn = torch.softmax(scores, dim=-1)
        ctx = (attn @ v).transpose(1, 2).reshape(b, t_q, self.d_model)
        out = self.w_o(ctx)
        return (out, attn) if return_weights else (out, None)


class FusionModel(nn.Module):
    """Listener-adaptive cross-domain fusion network for (competence, warmth)."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        enc_dim = 2 * cfg.blstm_hidden
        lis_dim = enc_dim + cfg.id_embed_dim
        self.speaker_encoder = nn.LSTM(
            cfg.speaker_dim, cfg.blstm_hidden, batch_first=True,
            bidirectional=True, dtype=DTYPE,
        )
        self.listener_encoder = nn.LSTM(
            cfg.listener_dim, cfg.blstm_hidden, batch_first=True,
            bidirectional=True, dtype=DTYPE,
        )
        self.id_embed = nn.Linear(cfg.n_listeners, cfg.id_embed_dim, bias=False, dtype=DTYPE)
        if cfg.use_intra_attention:
            self.intra_speaker = MultiHeadAttention(enc_dim, enc_dim, cfg.d_model, cfg.heads)
            self.intra_listener = MultiHeadAttention(lis_dim, lis_dim, cfg.d_model, cfg.heads)
        if cfg.use_inter_attention:
            self.speaker_to_listener = MultiHeadAttention(lis_dim, enc_dim, cfg.d_model, cfg.heads)
            self.listener_to_speaker = MultiHeadAttention(enc_dim, lis_dim, cfg.d_model, cfg.heads)
        self.fc = nn.Linear(cfg.n_branches * cfg.d_model, cfg.fc_hidden, dtype=DTYPE)
        self.head_competence = nn.Linear(cfg.fc_hidden, 1, dtype=DTYPE)
        self.head_warmth = nn.Linear(cfg.fc_hidden, 1, dtype=DTYPE)
        self.reset_parameters()

    def reset_parameters(self) -> None:
        """Seeded init: weights uniform in +-1/sqrt(fan_in), biases zero."""
        gen = torch.Generator().manual_seed(derive_seed(self.cfg.seed, "init"))
        for name, param in sorted(self.named_parameters()):
            with torch.no_grad():
                if "bias" in name:
                    param.zero_()
                else:
                    bound = 1.0 / (param.shape[-1] ** 0.5)
                    values = torch.rand(param.shape, generator=gen, dtype=DTYPE)
                    param.copy_(values * 2 * bound - bound)

    def _dropout(self, x, generator):
        p = self.cfg.dropout_p
        if p == 0.0:
            return x
        if generator is None:
            raise ConfigError("training-mode forward requires a dropout generator")
        mask = (torch.rand(x.shape, generator=generator, dtype=DTYPE) >= p).to(DTYPE)
        return x * mask / (1.0 - p)

    def forward(
        self,
        speaker,
        listener,
        listener_ids,
        train: bool = False,
        dropout_generator=None,
        keep_attention: bool = False,
    ) -> ForwardTrace:
        """Run a batch of equal-length windows through the network.

        Args:
            speaker: (B, T, speaker_dim) gated, normalized speaker frames.
            listener: (B, T, listener_dim) normalized listener frames.
            listener_ids: (B,) integer identities in [0, n_listeners).
            train: apply dropout (requires ``dropout_generator``).
            keep_attention: retain per-block attention maps in the trace.
        """
        cfg = self.cfg
        if speaker.dim() != 3 or listener.dim() != 3:
            raise InputShapeError("speaker/listener batches must be (batch, time, dim)")
        if speaker.shape[:2] != listener.shape[:2]:
            raise InputShapeError(
                f"speaker {tuple(speaker.shape)} and listener {tuple(listener.shape)} "
                "must share batch and window length"
            )
        ids = torch.as_tensor(listener_ids, dtype=torch.long).reshape(-1)
        if ids.numel() != speaker.shape[0]:
            raise InputShapeError("one listener id required per window")
        if ids.numel() and (ids.min() < 0 or ids.max() >= cfg.n_listeners):
            raise IndexError(
                f"listener id outside [0, {cfg.n_listeners}): {ids.min()}..{ids.max()}"
            )
        b, t = speaker.shape[0], speaker.shape[1]

        enc_s, _ = self.speaker_encoder(speaker)
        enc_l, _ = self.listener_encoder(listener)
        if cfg.use_listener_id:
            onehot = torch.zeros(b, cfg.n_listeners, dtype=DTYPE)
            onehot[torch.arange(b), ids] = 1.0
            embed = self.id_embed(onehot)
        else:
            embed = torch.zeros(b, cfg.id_embed_dim, dtype=DTYPE)
        enc_l = torch.cat([enc_l, embed.unsqueeze(1).expand(b, t, cfg.id_embed_dim)], dim=2)

        quad = EncodingQuad()
        attention = {} if keep_attention else None
        parts = []

        def run(block, q, k, v, name):
            out, attn = block(q, k, v, return_weights=keep_attention)
            if keep_attention:
                attention[name] = attn
            return out.mean(dim=1)

        if cfg.use_intra_attention:
            quad.h_s = run(self.intra_speaker, enc_s, enc_s, enc_s, "intra_speaker")
            quad.h_l = run(self.intra_listener, enc_l, enc_l, enc_l, "intra_listener")
            parts += [quad.h_s, quad.h_l]
        if cfg.use_inter_attention:
            quad.h_s_to_l = run(self.speaker_to_listener, enc_l, enc_s, enc_s, "speaker_to_listener")
            quad.h_l_to_s = run(self.listener_to_speaker, enc_s, enc_l, enc_l, "listener_to_speaker")
            parts += [quad.h_s_to_l, quad.h_l_to_s]

        hidden = torch.relu(self.fc(torch.cat(parts, dim=1)))
        if train:
            hidden = self._dropout(hidden, dropout_generator)
        c_p = self.head_competence(hidden).squeeze(-1)
        w_p = self.head_warmth(hidden).squeeze(-1)
        return ForwardTrace(quad=quad, c_p=c_p, w_p=w_p, attention=attention)


def init_model(cfg: ModelConfig) -> FusionModel:
    """Construct a FusionModel with deterministic, seed-driven parameters."""
    return FusionModel(cfg)
