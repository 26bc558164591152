"""Frozen feature extractors and their small deterministic references.

Each role (spatial, aesthetic, technical, flow, action, text) is a pure
function of ``(video, seed, config)``. The references here are cheap
hand-built statistics pushed through fixed seeded projections; real
pretrained backbones plug in through :class:`SubprocessExtractor` and the
feature-file format.
"""
import hashlib
import os
import struct
import subprocess
import tempfile
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from . import kernels
from .errors import BadDims, EmptyPrompt, TooFewFrames

LUMA = np.array([0.299, 0.587, 0.114])
MAG_BIN_EDGES = np.array([0.0, 0.5, 1.5, 2.5, 3.5, np.inf])


@dataclass(frozen=True)
class FrameStack:
    frames: np.ndarray  # (T, H, W, 3) in [0, 1]
    fps: float = 24.0
    source_id: str = ""

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 4 or frames.shape[-1] != 3:
            raise BadDims(f"frames must be (T, H, W, 3), got {frames.shape}")
        t, h, w, _ = frames.shape
        if t < 2:
            raise TooFewFrames(f"need at least 2 frames, got {t}")
        if h < 8 or w < 8:
            raise BadDims(f"frames must be at least 8x8, got {h}x{w}")
        if not np.all(np.isfinite(frames)) or frames.min() < 0.0 or frames.max() > 1.0:
            raise BadDims("frame values must be finite and in [0, 1]")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self):
        return self.frames.shape[0]


@dataclass(frozen=True)
class EncoderConfig:
    frames_sampled: int = 16
    flow_frames: int = 16
    sample_stride: int = 1
    patch_size: int = 8
    spatial_dim: int = 32
    aesthetic_dim: int = 16
    technical_dim: int = 16
    flow_dim: int = 16
    action_dim: int = 16
    text_dim: int = 32
    flow_block: int = 8
    flow_radius: int = 3
    flow_downsample: int = 4
    seed: int = 0

    def __post_init__(self):
        dims = (self.spatial_dim, self.aesthetic_dim, self.technical_dim,
                self.flow_dim, self.action_dim, self.text_dim)
        if min(dims) < 1:
            raise BadDims("all feature dimensions must be >= 1")
        if self.frames_sampled < 2 or self.sample_stride < 1 or self.patch_size < 1:
            raise BadDims("frames_sampled >= 2, sample_stride >= 1 and patch_size >= 1 are required")
        if self.flow_frames > self.frames_sampled:
            raise BadDims("flow_frames must not exceed frames_sampled")

    def to_dict(self):
        return asdict(self)


@dataclass
class FeatureBundle:
    spatial_tokens: np.ndarray  # (T, N, D_s)
    aesthetic: np.ndarray
    technical: np.ndarray
    flow_feat: np.ndarray
    action_feat: np.ndarray


def sample_indices(num_frames, count, stride=1):
    """First ``count`` frames at a fixed stride, clamped to the last frame.

    Clamping means appending copies of the final frame never changes the
    sampled content.
    """
    return np.minimum(np.arange(count) * stride, num_frames - 1)


def luminance(frames):
    return frames @ LUMA


def patch_means(frames, patch):
    """(T, H, W, C) -> (T, N, C) means over non-overlapping patches, row-major."""
    t, h, w, c = frames.shape
    gh, gw = h // patch, w // patch
    if gh == 0 or gw == 0:
        raise BadDims(f"patch size {patch} larger than frame {h}x{w}")
    crop = frames[:, : gh * patch, : gw * patch]
    return crop.reshape(t, gh, patch, gw, patch, c).mean(axis=(2, 4)).reshape(t, gh * gw, c)


def highpass_residual(img, size):
    """``img - box_size(img)`` with edge replication.

    Written as the mean of differences to every neighbour so a flat image
    gives an exactly zero residual.
    """
    r = size // 2
    padded = np.pad(img, [(0, 0)] * (img.ndim - 2) + [(r, r), (r, r)], mode="edge")
    h, w = img.shape[-2:]
    acc = np.zeros_like(img)
    for dy in range(size):
        for dx in range(size):
            acc += img - padded[..., dy:dy + h, dx:dx + w]
    return acc / (size * size)


def residual_energy(frames):
    """Per-video high-frequency statistics: (mean r3^2, mean |r3|, mean r5^2, mean |r5|)."""
    y = luminance(frames)
    r3 = highpass_residual(y, 3)
    r5 = highpass_residual(y, 5)
    return np.array([np.mean(r3 ** 2), np.mean(np.abs(r3)), np.mean(r5 ** 2), np.mean(np.abs(r5))])


def color_statistics(frames):
    """Global colour/luminance statistics averaged over frames (10 values)."""
    feats = []
    for f in frames:
        rgb = f.reshape(-1, 3)
        y = rgb @ LUMA
        rg = rgb[:, 0] - rgb[:, 1]
        yb = 0.5 * (rgb[:, 0] + rgb[:, 1]) - rgb[:, 2]
        colorful = np.hypot(rg.std(), yb.std()) + 0.3 * np.hypot(rg.mean(), yb.mean())
        sat = rgb.max(axis=1) - rgb.min(axis=1)
        feats.append(np.concatenate([rgb.mean(0), rgb.std(0), [y.mean(), y.std(), sat.mean(), colorful]]))
    return np.mean(feats, axis=0)


def delta_energies(lum, strides=(1, 2, 4)):
    """Temporal-difference energies per stride: (mean d^2, mean |d|, max_t mean d^2)."""
    out = []
    for s in strides:
        if lum.shape[0] <= s:
            out.extend([0.0, 0.0, 0.0])
            continue
        d = lum[s:] - lum[:-s]
        per_t = np.mean(d ** 2, axis=(1, 2))
        out.extend([per_t.mean(), np.mean(np.abs(d)), per_t.max()])
    return np.array(out)


def quantize(lum):
    return np.rint(np.clip(lum, 0.0, 1.0) * 255.0).astype(np.int32)


def downsample(img, factor):
    if factor <= 1:
        return img
    h, w = img.shape
    gh, gw = h // factor, w // factor
    return img[: gh * factor, : gw * factor].reshape(gh, factor, gw, factor).mean(axis=(1, 3))


def flow_fields(lum_frames, block, radius, factor):
    """Block-matching displacement fields for consecutive frame pairs.

    Returns ``(u, v)`` stacked over pairs, in downsampled pixels.
    """
    h, w = lum_frames.shape[1:]
    block = min(block, h, w)
    factor = max(1, min(factor, h // block, w // block))
    q = [quantize(downsample(f, factor)) for f in lum_frames]
    us, vs = [], []
    for a, b in zip(q[:-1], q[1:]):
        u, v = kernels.block_match(a, b, block=block, radius=radius)
        us.append(u)
        vs.append(v)
    return np.stack(us), np.stack(vs)


def flow_summary(u, v):
    """Magnitude histogram (5 bins, normalized), mean/std per direction, mean magnitude."""
    u = u.astype(np.float64).ravel()
    v = v.astype(np.float64).ravel()
    mag = np.hypot(u, v)
    hist, _ = np.histogram(mag, bins=MAG_BIN_EDGES)
    hist = hist / max(mag.size, 1)
    return np.concatenate([hist, [u.mean(), u.std(), v.mean(), v.std(), mag.mean()]])


def _seed_rng(seed, role):
    return np.random.default_rng([int(seed), role])


class ReferenceEncoders:
    """Deterministic reference implementations for every visual role.

    Projections are drawn once at construction from ``cfg.seed`` and never
    change; instances hold no caches.
    """

    SPATIAL, AESTHETIC, TECHNICAL, FLOW, ACTION = range(5)

    def __init__(self, cfg=None):
        self.cfg = cfg or EncoderConfig()
        c = self.cfg
        rng = _seed_rng(c.seed, self.SPATIAL)
        self.spatial_w = rng.uniform(-1.0, 1.0, (3, c.spatial_dim))
        self.spatial_b = rng.uniform(-0.1, 0.1, c.spatial_dim)
        self.aesthetic_w = _seed_rng(c.seed, self.AESTHETIC).standard_normal((10, c.aesthetic_dim)) * 4.0 / np.sqrt(10)
        # non-negative so the output norm is monotone in residual energy
        self.technical_w = np.abs(_seed_rng(c.seed, self.TECHNICAL).standard_normal((4, c.technical_dim))) * 10.0
        self.flow_w = _seed_rng(c.seed, self.FLOW).standard_normal((10, c.flow_dim)) / np.sqrt(10)
        self.action_w = _seed_rng(c.seed, self.ACTION).standard_normal((9, c.action_dim)) * 8.0

    def _sampled(self, video, count):
        return video.frames[sample_indices(video.num_frames, count, self.cfg.sample_stride)]

    def spatial_encode(self, video):
        frames = self._sampled(video, self.cfg.frames_sampled)
        return patch_means(frames, self.cfg.patch_size) @ self.spatial_w + self.spatial_b

    def aesthetic_encode(self, video):
        return color_statistics(self._sampled(video, self.cfg.frames_sampled)) @ self.aesthetic_w

    def technical_encode(self, video):
        return residual_energy(self._sampled(video, self.cfg.frames_sampled)) @ self.technical_w

    def flow_extract(self, video):
        if self.cfg.flow_frames < 2:
            raise TooFewFrames("flow extraction needs flow_frames >= 2")
        lum = luminance(self._sampled(video, self.cfg.flow_frames))
        u, v = flow_fields(lum, self.cfg.flow_block, self.cfg.flow_radius, self.cfg.flow_downsample)
        return flow_summary(u, v) @ self.flow_w

    def action_encode(self, video):
        lum = luminance(self._sampled(video, self.cfg.frames_sampled))
        return delta_energies(lum) @ self.action_w

    def encode(self, video):
        return FeatureBundle(
            spatial_tokens=self.spatial_encode(video),
            aesthetic=self.aesthetic_encode(video),
            technical=self.technical_encode(video),
            flow_feat=self.flow_extract(video),
            action_feat=self.action_encode(video),
        )


def token_embedding(token, dim, seed):
    digest = hashlib.blake2b(f"{seed}\x00{token}".encode(), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return rng.standard_normal(dim) / np.sqrt(dim)


ENC_TOKEN = "[enc]"


class HashTextEncoder(nn.Module):
    """Frozen text encoder: hashed token embeddings plus one cross-attention
    read from the visual tokens into the ``[enc]`` position.

    Word rows never see the visual input. The attention has no biases, so
    all-zero visual tokens contribute exactly zero.
    """

    def __init__(self, dim, seed=0):
        super().__init__()
        self.dim, self.seed = dim, seed
        g = torch.Generator().manual_seed(int(seed) + 7919)
        scale = 1.0 / np.sqrt(dim)
        self.w_q = nn.Parameter(torch.randn(dim, dim, generator=g) * scale, requires_grad=False)
        self.w_k = nn.Parameter(torch.randn(dim, dim, generator=g) * scale, requires_grad=False)
        self.w_v = nn.Parameter(torch.randn(dim, dim, generator=g) * scale, requires_grad=False)

    def embed(self, tokens):
        rows = [token_embedding(t, self.dim, self.seed) for t in tokens]
        return torch.as_tensor(np.stack(rows), dtype=self.w_q.dtype)

    def forward(self, visual_tokens, prompt):
        tokens = prompt.word_tokens if hasattr(prompt, "word_tokens") else tuple(prompt)
        if not tokens:
            raise EmptyPrompt("prompt has no word tokens")
        visual = torch.as_tensor(visual_tokens, dtype=self.w_q.dtype)
        if visual.ndim == 1:
            visual = visual.unsqueeze(0)
        if visual.shape[-1] != self.dim:
            raise BadDims(f"visual tokens have dim {visual.shape[-1]}, expected {self.dim}")
        emb = self.embed((ENC_TOKEN, *tokens))
        enc = emb[0]
        q = enc @ self.w_q
        k = visual @ self.w_k
        attn = torch.softmax(k @ q / np.sqrt(self.dim), dim=0)
        f_enc = enc + attn @ (visual @ self.w_v)
        return f_enc, emb[1:]


# --- external extractor contract -------------------------------------------------

FEATURE_MAGIC = b"CRVFEAT1"
_FEATURE_HEADER = struct.Struct("<8sQ")  # magic, dim -> 16 bytes


def write_feature_file(path, vec):
    vec = np.asarray(vec, dtype="<f4").ravel()
    with open(path, "wb") as fh:
        fh.write(_FEATURE_HEADER.pack(FEATURE_MAGIC, vec.size))
        fh.write(vec.tobytes())


def read_feature_file(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _FEATURE_HEADER.size:
        raise BadDims(f"{path}: truncated feature header")
    magic, dim = _FEATURE_HEADER.unpack_from(data)
    if magic != FEATURE_MAGIC:
        raise BadDims(f"{path}: bad feature-file magic {magic!r}")
    body = data[_FEATURE_HEADER.size:]
    if len(body) != 4 * dim:
        raise BadDims(f"{path}: header says {dim} floats, body has {len(body) // 4}")
    return np.frombuffer(body, dtype="<f4").astype(np.float64)


class SubprocessExtractor:
    """Run an external extractor ``command`` (argv list) as
    ``command + [frames.npy, out.feat]`` and read back its feature vector."""

    def __init__(self, command, expected_dim=None, timeout=600):
        self.command = list(command)
        self.expected_dim = expected_dim
        self.timeout = timeout

    def __call__(self, video):
        with tempfile.TemporaryDirectory() as tmp:
            src = os.path.join(tmp, "frames.npy")
            dst = os.path.join(tmp, "out.feat")
            np.save(src, video.frames.astype(np.float32))
            subprocess.run(self.command + [src, dst], check=True, timeout=self.timeout)
            vec = read_feature_file(dst)
        if self.expected_dim is not None and vec.size != self.expected_dim:
            raise BadDims(f"extractor returned {vec.size} dims, expected {self.expected_dim}")
        return vec
