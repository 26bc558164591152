"""The evaluator network: temporal adapter, three branch scores and fusion.

Branches
--------
visual harmony
    affine head over ``aesthetic (+) technical`` features.
text-temporal alignment
    spatial tokens -> temporal adapter -> pooled, projected video feature
    ``F_v``; the frozen text encoder reads ``F_v`` into its ``[enc]``
    position; the score is the sum over granularity levels of
    ``cos(F_level, F_v)``.
motion fidelity
    feed-forward network over ``flow (+) action`` then an affine head.

The three scalars are fused by a learned affine map.
"""
import math
from dataclasses import asdict, dataclass, field

import torch
from torch import nn

from .encoders import EncoderConfig, HashTextEncoder, ReferenceEncoders
from .errors import BadDims, TooFewFrames, ZeroVector
from .text import LEVELS, build_bundle

ADAPTER_VARIANTS = ("pseudo3dconv", "temporal_attention", "st_graph", "none")
MOTION_MODES = ("hybrid", "low", "high", "none")

# Parameter groups for the two training phases; the text encoder is never trained.
PROBE_GROUPS = ("adapter", "vh_head", "hmm_head", "fusion_head")
FINETUNE_GROUPS = PROBE_GROUPS + ("projection", "hmm_ffn")
FROZEN_GROUPS = ("text_encoder",)


@dataclass(frozen=True)
class TemporalAdapterConfig:
    variant: str = "pseudo3dconv"
    kernel_t: int = 3
    channels: int = 0  # 0 -> spatial token dim
    residual: bool = True

    def __post_init__(self):
        if self.variant not in ADAPTER_VARIANTS:
            raise ValueError(f"adapter variant must be one of {ADAPTER_VARIANTS}, got {self.variant!r}")
        if self.kernel_t < 1 or self.kernel_t % 2 == 0:
            raise ValueError("kernel_t must be odd and >= 1")
        if self.channels < 0:
            raise ValueError("channels must be >= 0")


@dataclass(frozen=True)
class ModelConfig:
    adapter: TemporalAdapterConfig = field(default_factory=TemporalAdapterConfig)
    levels: tuple = LEVELS
    motion_mode: str = "hybrid"
    hmm_hidden: int = 32
    hmm_dim: int = 16

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(lvl for lvl in LEVELS if lvl in set(self.levels)))
        if self.motion_mode not in MOTION_MODES:
            raise ValueError(f"motion_mode must be one of {MOTION_MODES}, got {self.motion_mode!r}")

    def to_dict(self):
        d = asdict(self)
        d["levels"] = list(self.levels)
        return d


@dataclass(frozen=True)
class BranchScores:
    o_vh: float
    o_align: float
    o_hmm: float
    fused: float


class TemporalAdapter(nn.Module):
    """Mixes spatial tokens along time, then mean-pools over (T, N)."""

    def __init__(self, in_dim, cfg):
        super().__init__()
        self.cfg = cfg
        c = cfg.channels or in_dim
        self.out_dim = c
        self.in_proj = nn.Linear(in_dim, c) if c != in_dim else None
        if cfg.variant == "pseudo3dconv":
            self.conv = nn.Conv1d(c, c, cfg.kernel_t)
        elif cfg.variant == "temporal_attention":
            self.q = nn.Linear(c, c)
            self.k = nn.Linear(c, c)
            self.v = nn.Linear(c, c)
        elif cfg.variant == "st_graph":
            self.mix = nn.Linear(c, c)

    def mix_tokens(self, x):
        """(T, N, C) -> (T', N, C)."""
        t, n, c = x.shape
        variant = self.cfg.variant
        if variant == "pseudo3dconv":
            k = self.cfg.kernel_t
            if t < k:
                raise TooFewFrames(f"pseudo3dconv needs T >= kernel_t ({t} < {k})")
            seq = x.permute(1, 2, 0)  # (N, C, T)
            y = self.conv(seq)
            if self.cfg.residual:
                half = k // 2
                y = y + seq[:, :, half:t - half]
            return y.permute(2, 0, 1)
        if variant == "temporal_attention":
            seq = x.transpose(0, 1)  # (N, T, C)
            w = torch.softmax(self.q(seq) @ self.k(seq).transpose(1, 2) / math.sqrt(c), dim=-1)
            y = w @ self.v(seq)
            if self.cfg.residual:
                y = y + seq
            return y.transpose(0, 1)
        if variant == "st_graph":
            flat = x.reshape(t * n, c)
            adj = torch.softmax(flat @ flat.T / math.sqrt(c), dim=-1)
            y = torch.relu(self.mix(adj @ flat))
            if self.cfg.residual:
                y = y + flat
            return y.reshape(t, n, c)
        return x

    def forward(self, tokens):
        x = tokens if self.in_proj is None else self.in_proj(tokens)
        return self.mix_tokens(x).mean(dim=(0, 1))


def align_score(f_v, bundle):
    """Sum of cosine similarities between ``f_v`` and each present level."""
    nv = torch.linalg.vector_norm(f_v)
    if nv == 0:
        raise ZeroVector("video feature has zero norm")
    total = f_v.new_zeros(())
    for lvl in bundle.levels_present:
        vec = getattr(bundle, lvl)
        nl = torch.linalg.vector_norm(vec)
        if nl == 0:
            raise ZeroVector(f"{lvl} embedding has zero norm")
        total = total + torch.dot(vec, f_v) / (nl * nv)
    return total


def _uniform_init(module, gen):
    for sub in module.modules():
        if isinstance(sub, (nn.Linear, nn.Conv1d)):
            fan_in = sub.weight[0].numel()
            bound = 1.0 / math.sqrt(fan_in)
            with torch.no_grad():
                sub.weight.uniform_(-bound, bound, generator=gen)
                if sub.bias is not None:
                    sub.bias.uniform_(-bound, bound, generator=gen)


class CraveModel(nn.Module):
    def __init__(self, enc_cfg=None, cfg=None, seed=0):
        super().__init__()
        self.enc_cfg = enc_cfg or EncoderConfig()
        self.cfg = cfg or ModelConfig()
        e, m = self.enc_cfg, self.cfg
        self.adapter = TemporalAdapter(e.spatial_dim, m.adapter)
        self.projection = nn.Linear(self.adapter.out_dim, e.text_dim)
        self.text_encoder = HashTextEncoder(e.text_dim, seed=e.seed)
        self.vh_head = nn.Linear(e.aesthetic_dim + e.technical_dim, 1)
        self.hmm_ffn = nn.Sequential(
            nn.Linear(e.flow_dim + e.action_dim, m.hmm_hidden),
            nn.ReLU(),
            nn.Linear(m.hmm_hidden, m.hmm_dim),
        )
        self.hmm_head = nn.Linear(m.hmm_dim, 1)
        self.fusion_head = nn.Linear(3, 1)
        gen = torch.Generator().manual_seed(int(seed))
        for name in FINETUNE_GROUPS:
            _uniform_init(getattr(self, name), gen)

    # -- branch ops -------------------------------------------------------------

    def temporal_adapt(self, spatial_tokens):
        tokens = torch.as_tensor(spatial_tokens, dtype=self.projection.weight.dtype)
        if tokens.ndim != 3 or tokens.shape[-1] != self.enc_cfg.spatial_dim:
            raise BadDims(f"spatial tokens must be (T, N, {self.enc_cfg.spatial_dim}), got {tuple(tokens.shape)}")
        return self.projection(self.adapter(tokens))

    def visual_harmony(self, aesthetic, technical):
        feats = torch.cat([self._t(aesthetic), self._t(technical)])
        return self.vh_head(feats)[0]

    def hmm_score(self, flow_feat, action_feat):
        flow, action = self._t(flow_feat), self._t(action_feat)
        if flow.shape[0] != self.enc_cfg.flow_dim or action.shape[0] != self.enc_cfg.action_dim:
            raise BadDims("flow/action feature dims do not match the encoder config")
        mode = self.cfg.motion_mode
        if mode in ("high", "none"):
            flow = torch.zeros_like(flow)
        if mode in ("low", "none"):
            action = torch.zeros_like(action)
        return self.hmm_head(self.hmm_ffn(torch.cat([flow, action])))[0]

    def alignment(self, f_v, tokens, spans):
        if not self.cfg.levels:
            return f_v.new_zeros(())
        f_enc, f_word = self.text_encoder(f_v, tokens)
        bundle = build_bundle(f_enc, f_word, spans, self.cfg.levels)
        return align_score(f_v, bundle)

    def forward(self, features, tokens, spans):
        """Return the 4-vector ``(o_vh, o_align, o_hmm, fused)``."""
        o_vh = self.visual_harmony(features.aesthetic, features.technical)
        f_v = self.temporal_adapt(features.spatial_tokens)
        o_align = self.alignment(f_v, tokens, spans)
        o_hmm = self.hmm_score(features.flow_feat, features.action_feat)
        branches = torch.stack([o_vh, o_align, o_hmm])
        fused = self.fusion_head(branches)[0]
        return torch.cat([branches, fused.unsqueeze(0)])

    def _t(self, x):
        return torch.as_tensor(x, dtype=self.projection.weight.dtype)

    # -- parameter bookkeeping ---------------------------------------------------

    def group_parameters(self, groups):
        return [p for name in groups for p in getattr(self, name).parameters()]

    def set_trainable(self, groups):
        for p in self.parameters():
            p.requires_grad_(False)
        for p in self.group_parameters(groups):
            p.requires_grad_(True)


def scores_from_tensor(out):
    vals = [float(v) for v in out.detach()]
    return BranchScores(*vals)


class Evaluator:
    """Encoders + model + text front end: scores a raw video and prompt."""

    def __init__(self, model, encoders=None, tagger=None):
        from .text import LexiconTagger

        self.model = model
        self.encoders = encoders or ReferenceEncoders(model.enc_cfg)
        self.tagger = tagger or LexiconTagger()

    def text_inputs(self, prompt):
        from .text import PromptText, chunk_phrases

        if isinstance(prompt, str):
            prompt = PromptText.from_text(prompt)
        tokens = prompt.word_tokens
        return tokens, chunk_phrases(tokens, self.tagger(tokens))

    def predict(self, video, prompt):
        features = self.encoders.encode(video)
        tokens, spans = self.text_inputs(prompt)
        with torch.no_grad():
            return scores_from_tensor(self.model(features, tokens, spans))
