"""Synthetic video fixtures shared by the test-suite."""
import numpy as np
import torch

from crave.encoders import EncoderConfig, FeatureBundle, FrameStack
from crave.harness import DatasetManifest, Record, Sample
from crave.model import CraveModel
from crave.study import AnnotationTable

PROMPT_WORDS = (
    "a red fox runs across the snowy field",
    "the old man walks along a quiet street at night",
    "a small boat drifts on the calm lake under golden light",
    "two birds fly over the misty forest",
    "a young girl dances in the bright market",
    "the train crosses a wooden bridge near the mountains",
    "waves flow onto the sandy beach at sunset",
    "a black cat sits beside the window",
)


def moving_square_video(rng, frames=16, size=64, speed=(1.0, 0.0), noise=0.0, square=16, jitter=0.0):
    """Textured square translating over a smooth gradient background."""
    yy, xx = np.mgrid[0:size, 0:size] / size
    base = np.stack([0.3 + 0.4 * xx, 0.3 + 0.3 * yy, 0.5 - 0.2 * xx], axis=-1)
    tex = rng.uniform(0.0, 1.0, (square, square, 3))
    out = np.empty((frames, size, size, 3))
    y0, x0 = size // 2 - square // 2, size // 4
    for t in range(frames):
        f = base.copy()
        dy = int(round(y0 + speed[1] * t + jitter * rng.normal()))
        dx = int(round(x0 + speed[0] * t + jitter * rng.normal()))
        dy = int(np.clip(dy, 0, size - square))
        dx = int(np.clip(dx, 0, size - square))
        f[dy:dy + square, dx:dx + square] = tex
        if noise:
            f = f + rng.normal(0.0, noise, f.shape)
        out[t] = np.clip(f, 0.0, 1.0)
    return out


def random_video(rng, frames=16, size=64):
    speed = (rng.uniform(-2.5, 2.5), rng.uniform(-1.5, 1.5))
    return moving_square_video(
        rng, frames=frames, size=size, speed=speed,
        noise=rng.uniform(0.0, 0.15), jitter=rng.uniform(0.0, 2.0),
    )


def synthetic_manifest(n=32, seed=0, frames=16, size=64, tmp_path=None):
    """Records plus the videos themselves (``videos[video_id] -> FrameStack``)."""
    rng = np.random.default_rng(seed)
    videos, records = {}, []
    for i in range(n):
        vid = f"v{i:03d}"
        arr = random_video(rng, frames, size)
        videos[vid] = FrameStack(arr, source_id=vid)
        path = f"{vid}.npy"
        if tmp_path is not None:
            np.save(tmp_path / path, arr)
        records.append(Record(vid, path, PROMPT_WORDS[i % len(PROMPT_WORDS)], None, f"gen{i % 3}"))
    base = str(tmp_path) if tmp_path is not None else "."
    return DatasetManifest(records, base_dir=base), videos


def annotation_table(scores, kind="raw"):
    scores = np.asarray(scores, dtype=float)
    m, i = scores.shape
    return AnnotationTable(scores, [f"v{k}" for k in range(m)], [f"a{k}" for k in range(i)], kind=kind)


def homogeneous_table(seed=0, videos=40, annotators=21):
    """Everyone scores the same latent quality with light-tailed noise."""
    rng = np.random.default_rng(seed)
    truth = rng.uniform(3, 8, videos)
    noise = np.clip(rng.normal(0, 1.0, (videos, annotators)), -1.5, 1.5)
    return annotation_table(np.clip(truth[:, None] + noise, 1, 10))


def planted_outlier_table(seed=0):
    rng = np.random.default_rng(seed)
    scores = np.clip(np.round(rng.normal(3, 1, (40, 21))), 1, 10)
    scores[:, 20] = 10
    return annotation_table(scores)


def erratic_observer_table(seed=0):
    """20 consistent annotators (light-tailed noise) plus one whose scores
    flip symmetrically above and below the consensus."""
    rng = np.random.default_rng(seed)
    truth = rng.uniform(4, 7, 40)
    noise = np.clip(rng.normal(0, 1.0, (40, 21)), -1.5, 1.5)
    scores = np.clip(truth[:, None] + noise, 1, 10)
    signs = np.where(np.arange(40) % 2 == 0, 1.0, -1.0)
    scores[:, 20] = np.clip(truth + 2.5 * signs, 1, 10)
    return annotation_table(scores)


def ranking_fixture(gen_scores, enc_cfg=None):
    """A model whose fused score is the first aesthetic feature, plus
    samples whose first aesthetic feature is the given score."""
    enc = enc_cfg or EncoderConfig()
    model = CraveModel(enc, seed=0)
    with torch.no_grad():
        model.fusion_head.weight.copy_(torch.tensor([[1.0, 0.0, 0.0]]))
        model.fusion_head.bias.zero_()
        model.vh_head.weight.zero_()
        model.vh_head.weight[0, 0] = 1.0
        model.vh_head.bias.zero_()
    rng = np.random.default_rng(0)
    records, samples = [], []
    for i, (gen, score) in enumerate(gen_scores):
        aest = np.zeros(enc.aesthetic_dim)
        aest[0] = score
        feats = FeatureBundle(rng.normal(size=(4, 4, enc.spatial_dim)), aest, rng.normal(size=enc.technical_dim),
                              rng.normal(size=enc.flow_dim), rng.normal(size=enc.action_dim))
        records.append(Record(f"v{i}", "x", "a cat", None, gen))
        samples.append(Sample(f"v{i}", feats, ("a", "cat"), [], None, gen))
    return model, DatasetManifest(records), samples
