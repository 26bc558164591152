"""Dataset manifests, configuration, training, evaluation and ranking."""
import csv
import dataclasses
import hashlib
import io
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from . import checkpoint as ckpt
from .encoders import EncoderConfig, FrameStack, ReferenceEncoders
from .errors import (
    DuplicateId,
    EmptyDataset,
    EmptyPrompt,
    MissingField,
    MissingMos,
    NoLabels,
    ParseError,
    TooFewItems,
)
from .metrics import correlation_report, make_folds, mean_report
from .model import (
    FINETUNE_GROUPS,
    FROZEN_GROUPS,
    PROBE_GROUPS,
    CraveModel,
    ModelConfig,
    TemporalAdapterConfig,
    scores_from_tensor,
)
from .objective import LossConfig, total_loss
from .text import LexiconTagger, chunk_phrases, tokenize_words

log = logging.getLogger(__name__)

MANIFEST_SCHEMA = 1
MANIFEST_COLUMNS = ("video_id", "frames", "prompt", "mos", "generator", "split")
REQUIRED_COLUMNS = ("video_id", "frames", "prompt")


# -- manifest ------------------------------------------------------------------------


@dataclass(frozen=True)
class Record:
    video_id: str
    frames: str
    prompt: str
    mos: float = None
    generator: str = None
    split: str = None


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple = ()
    schema_version: int = MANIFEST_SCHEMA
    base_dir: str = "."

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for r in self.records:
            if r.video_id in seen:
                raise DuplicateId(f"duplicate video_id {r.video_id!r}")
            seen.add(r.video_id)
            if not r.prompt.strip():
                raise EmptyPrompt(f"record {r.video_id!r} has an empty prompt")

    def __len__(self):
        return len(self.records)

    def subset(self, indices):
        return dataclasses.replace(self, records=[self.records[i] for i in indices])

    def split(self, name):
        return dataclasses.replace(self, records=[r for r in self.records if r.split == name])

    def with_mos(self, values):
        recs = [dataclasses.replace(r, mos=float(v)) for r, v in zip(self.records, values)]
        return dataclasses.replace(self, records=recs)

    def require_mos(self):
        missing = [r.video_id for r in self.records if r.mos is None]
        if missing:
            raise MissingMos(f"records without MOS: {missing[:5]}")


def dumps_manifest(manifest):
    buf = io.StringIO()
    buf.write(f"# crave-manifest {manifest.schema_version}\n")
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(MANIFEST_COLUMNS)
    for r in manifest.records:
        w.writerow([r.video_id, r.frames, r.prompt, "" if r.mos is None else repr(float(r.mos)),
                    r.generator or "", r.split or ""])
    return buf.getvalue()


def write_manifest(manifest, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps_manifest(manifest))


def load_manifest(path):
    """Parse a tab-separated manifest; frame paths resolve against its directory."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    version = MANIFEST_SCHEMA
    if lines and lines[0].startswith("#"):
        parts = lines[0][1:].split()
        if len(parts) != 2 or parts[0] != "crave-manifest":
            raise ParseError(f"{path}: bad manifest preamble {lines[0]!r}")
        try:
            version = int(parts[1])
        except ValueError:
            raise ParseError(f"{path}: bad schema version {parts[1]!r}") from None
        if version != MANIFEST_SCHEMA:
            raise ParseError(f"{path}: unsupported schema version {version}")
        lines = lines[1:]
    rows = list(csv.reader(lines, delimiter="\t"))
    if not rows:
        raise ParseError(f"{path}: missing header row")
    header = rows[0]
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise MissingField(f"{path}: manifest lacks column {col!r}")
    unknown = set(header) - set(MANIFEST_COLUMNS)
    if unknown:
        raise ParseError(f"{path}: unknown columns {sorted(unknown)}")
    records = []
    for ln, row in enumerate(rows[1:], start=3):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}:{ln}: expected {len(header)} fields, got {len(row)}")
        d = dict(zip(header, row))
        for col in REQUIRED_COLUMNS:
            if not d[col]:
                raise MissingField(f"{path}:{ln}: empty {col!r}")
        try:
            mos = float(d["mos"]) if d.get("mos") else None
        except ValueError:
            raise ParseError(f"{path}:{ln}: bad mos {d['mos']!r}") from None
        records.append(Record(d["video_id"], d["frames"], d["prompt"], mos,
                              d.get("generator") or None, d.get("split") or None))
    return DatasetManifest(records, version, os.path.dirname(os.path.abspath(path)))


def load_frames(path, base_dir=".", fps=24.0):
    """Frames from a ``.npy`` tensor (T, H, W, 3) or a directory of numbered images."""
    full = path if os.path.isabs(path) else os.path.join(base_dir, path)
    if os.path.isdir(full):
        from PIL import Image

        names = sorted(n for n in os.listdir(full) if n.lower().endswith((".png", ".jpg", ".jpeg", ".bmp")))
        arr = np.stack([np.asarray(Image.open(os.path.join(full, n)).convert("RGB")) for n in names])
    else:
        arr = np.load(full)
    arr = np.asarray(arr)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    return FrameStack(arr, fps=fps, source_id=os.path.basename(path))


# -- configuration -------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    probe_epochs: int = 20
    finetune_epochs: int = 10
    alt_total_epochs: int = 40
    schedule: str = "probe_finetune"  # or "single" (one phase, all trainable groups)
    learning_rate: float = 1e-3
    batch_size: int = 8
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    adapter: TemporalAdapterConfig = field(default_factory=TemporalAdapterConfig)
    model: ModelConfig = None

    def __post_init__(self):
        if min(self.probe_epochs, self.finetune_epochs, self.alt_total_epochs) < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.learning_rate <= 0 or self.batch_size < 2:
            raise ValueError("learning_rate must be > 0 and batch_size >= 2")
        if self.schedule not in ("probe_finetune", "single"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        model = self.model or ModelConfig()
        object.__setattr__(self, "model", dataclasses.replace(model, adapter=self.adapter))

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["model"] = {k: v for k, v in self.model.to_dict().items() if k != "adapter"}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        adapter = TemporalAdapterConfig(**d.pop("adapter", {}))
        model_d = dict(d.pop("model", {}))
        if "levels" in model_d:
            model_d["levels"] = tuple(model_d["levels"])
        return cls(
            loss=LossConfig(**d.pop("loss", {})),
            encoder=EncoderConfig(**d.pop("encoder", {})),
            adapter=adapter,
            model=ModelConfig(adapter=adapter, **model_d),
            **d,
        )

    def with_overrides(self, pairs):
        """Apply flat ``section.key=value`` overrides; values coerce to the field's type."""
        d = self.to_dict()
        for key, raw in pairs:
            target, parts = d, key.split(".")
            for p in parts[:-1]:
                if p not in target or not isinstance(target[p], dict):
                    raise ParseError(f"unknown config section in {key!r}")
                target = target[p]
            leaf = parts[-1]
            if leaf not in target:
                raise ParseError(f"unknown config key {key!r}")
            target[leaf] = _coerce(target[leaf], raw, key)
        return TrainConfig.from_dict(d)


def _coerce(current, raw, key):
    raw = raw.strip()
    try:
        if isinstance(current, bool):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, (list, tuple)):
            return [s.strip() for s in raw.split(",") if s.strip()]
    except ValueError:
        raise ParseError(f"bad value {raw!r} for {key!r}") from None
    return raw


def parse_config_text(text):
    pairs = []
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"config line {ln}: expected key=value")
        k, v = line.split("=", 1)
        pairs.append((k.strip(), v))
    return pairs


def load_config(path=None, seed=None):
    cfg = TrainConfig()
    if path:
        with open(path, encoding="utf-8") as fh:
            cfg = cfg.with_overrides(parse_config_text(fh.read()))
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=int(seed))
    return cfg


def dumps_config(cfg):
    def flat(d, prefix=""):
        for k, v in d.items():
            if isinstance(v, dict):
                yield from flat(v, f"{prefix}{k}.")
            elif isinstance(v, (list, tuple)):
                yield f"{prefix}{k}={','.join(map(str, v))}"
            else:
                yield f"{prefix}{k}={v}"

    return "\n".join(flat(cfg.to_dict())) + "\n"


# -- feature extraction ----------------------------------------------------------------


@dataclass
class Sample:
    video_id: str
    features: object
    tokens: tuple
    spans: list
    mos: float = None
    generator: str = None


def extract_samples(manifest, cfg, loader=None, tagger=None):
    """Run the frozen encoders and text front end once per record."""
    encoders = ReferenceEncoders(cfg.encoder)
    tagger = tagger or LexiconTagger()
    loader = loader or (lambda rec: load_frames(rec.frames, manifest.base_dir))
    out = []
    for rec in manifest.records:
        feats = encoders.encode(loader(rec))
        tokens = tuple(tokenize_words(rec.prompt))
        if not tokens:
            raise EmptyPrompt(f"record {rec.video_id!r} has no word tokens")
        spans = chunk_phrases(tokens, tagger(tokens))
        out.append(Sample(rec.video_id, feats, tokens, spans, rec.mos, rec.generator))
    return out


# -- training --------------------------------------------------------------------------


@dataclass
class TrainResult:
    model: CraveModel
    checkpoint: bytes
    history: list  # (phase, epoch, training-set loss)


def build_model(cfg):
    torch.set_default_dtype(torch.float32)
    return CraveModel(cfg.encoder, cfg.model, seed=cfg.seed)


def _forward_fused(model, samples):
    return torch.stack([model(s.features, s.tokens, s.spans)[3] for s in samples])


def _batches(order, size):
    chunks = [order[i:i + size] for i in range(0, len(order), size)]
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def _dataset_loss(model, samples, targets, loss_cfg):
    with torch.no_grad():
        return float(total_loss(_forward_fused(model, samples), targets, loss_cfg))


def train(manifest, cfg, samples=None, loader=None):
    """Linear probe then full fine-tune (or one ``single`` phase).

    The text encoder is frozen throughout. Deterministic for a fixed seed.
    """
    if not len(manifest.records if manifest is not None else samples):
        raise EmptyDataset("cannot train on an empty manifest")
    if samples is None:
        manifest.require_mos()
        samples = extract_samples(manifest, cfg, loader)
    if any(s.mos is None for s in samples):
        raise MissingMos("every training record needs a MOS")
    if len(samples) < 2:
        raise EmptyDataset("training needs at least 2 records")
    model = build_model(cfg)
    targets = torch.tensor([s.mos for s in samples], dtype=torch.float32)
    if cfg.schedule == "probe_finetune":
        phases = [("probe", PROBE_GROUPS, cfg.probe_epochs), ("finetune", FINETUNE_GROUPS, cfg.finetune_epochs)]
    else:
        phases = [("single", FINETUNE_GROUPS, cfg.alt_total_epochs)]
    rng = np.random.default_rng(cfg.seed)
    history = []
    model.train()
    for phase, groups, epochs in phases:
        model.set_trainable(groups)
        params = [p for p in model.parameters() if p.requires_grad]
        opt = torch.optim.Adam(params, lr=cfg.learning_rate)
        for epoch in range(1, epochs + 1):
            for idx in _batches(rng.permutation(len(samples)), cfg.batch_size):
                batch_t = targets[idx]
                if torch.all(batch_t == batch_t[0]):
                    continue
                opt.zero_grad()
                loss = total_loss(_forward_fused(model, [samples[i] for i in idx]), batch_t, cfg.loss)
                loss.backward()
                opt.step()
            epoch_loss = _dataset_loss(model, samples, targets, cfg.loss)
            history.append((phase, epoch, epoch_loss))
            log.info("%s epoch %d loss %.6f", phase, epoch, epoch_loss)
    model.set_trainable(())
    model.eval()
    metadata = {
        "trainable_probe": list(PROBE_GROUPS),
        "trainable_finetune": list(FINETUNE_GROUPS),
        "frozen": list(FROZEN_GROUPS),
        "history": [[p, e, v] for p, e, v in history],
    }
    data = ckpt.dumps(model.state_dict(), {"train": cfg.to_dict()}, metadata)
    return TrainResult(model, data, history)


def load_model(source):
    """Model and config from checkpoint bytes or a checkpoint path."""
    if isinstance(source, (bytes, bytearray)):
        state, config, _ = ckpt.loads(bytes(source))
    else:
        state, config, _ = ckpt.load(source)
    cfg = TrainConfig.from_dict(config["train"])
    model = build_model(cfg)
    model.load_state_dict(state)
    model.set_trainable(())
    model.eval()
    return model, cfg


# -- scoring / evaluation ------------------------------------------------------------


def score_samples(model, samples):
    with torch.no_grad():
        return [scores_from_tensor(model(s.features, s.tokens, s.spans)) for s in samples]


def _resolve(checkpoint_or_model):
    if isinstance(checkpoint_or_model, CraveModel):
        return checkpoint_or_model, None
    return load_model(checkpoint_or_model)


def score_manifest(checkpoint, manifest, samples=None, loader=None):
    """Branch scores for every record, in manifest order. Never needs MOS."""
    model, cfg = _resolve(checkpoint)
    cfg = cfg or TrainConfig(encoder=model.enc_cfg, adapter=model.cfg.adapter, model=model.cfg)
    samples = samples if samples is not None else extract_samples(manifest, cfg, loader)
    return score_samples(model, samples)


def write_scores(path, video_ids, scores):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("video_id\to_vh\to_align\to_hmm\tfused\n")
        for vid, s in zip(video_ids, scores):
            fh.write(f"{vid}\t{s.o_vh!r}\t{s.o_align!r}\t{s.o_hmm!r}\t{s.fused!r}\n")


def evaluate(checkpoint, manifest, samples=None, loader=None):
    """SRCC / PLCC / KRCC of fused scores against MOS.

    ``checkpoint`` may also be any object with a ``score(manifest)`` method
    returning fused scores in record order (used for stubs).
    """
    manifest.require_mos()
    if hasattr(checkpoint, "score"):
        fused = list(checkpoint.score(manifest))
    else:
        fused = [s.fused for s in score_manifest(checkpoint, manifest, samples, loader)]
    return correlation_report(fused, [r.mos for r in manifest.records])


@dataclass
class KFoldResult:
    plan: object
    fold_reports: list
    mean: object
    checkpoint_digests: list


def kfold_evaluate(manifest, cfg, k=10, loader=None, samples=None):
    """Train on k-1 folds, evaluate on the held-out fold, for every fold.

    Each fold re-initializes the model from ``cfg.seed``.
    """
    manifest.require_mos()
    plan = make_folds(len(manifest), k, cfg.seed)
    smallest = min(len(f) for f in plan.folds())
    if smallest < 2:
        raise TooFewItems(f"a {k}-fold split of {len(manifest)} records leaves a test fold of {smallest}; "
                          "per-fold correlations need at least 2")
    samples = samples if samples is not None else extract_samples(manifest, cfg, loader)
    reports, digests = [], []
    for fold in range(k):
        train_idx, test_idx = plan.train_indices(fold), plan.test_indices(fold)
        result = train(None, cfg, samples=[samples[i] for i in train_idx])
        digests.append(hashlib.sha256(result.checkpoint).hexdigest())
        fused = [s.fused for s in score_samples(result.model, [samples[i] for i in test_idx])]
        reports.append(correlation_report(fused, [samples[i].mos for i in test_idx]))
    return KFoldResult(plan, reports, mean_report(reports), digests)


def rank_generators(checkpoint, manifest, samples=None, loader=None):
    """Generators ordered by mean fused score, descending; ties by label."""
    labels = [r.generator for r in manifest.records]
    if not labels or any(lbl is None for lbl in labels):
        raise NoLabels("every record needs a generator label for ranking")
    fused = [s.fused for s in score_manifest(checkpoint, manifest, samples, loader)]
    groups = {}
    for lbl, f in zip(labels, fused):
        groups.setdefault(lbl, []).append(f)
    means = [(lbl, math.fsum(v) / len(v)) for lbl, v in groups.items()]  # fsum: order-independent
    return sorted(means, key=lambda t: (-t[1], t[0]))
