"""Subjective-study processing: per-annotator z-scoring, ITU-R BT.500
observer screening and MOS aggregation.

Missing scores are carried as NaN with a parallel boolean mask; screening
only ever widens the mask.
"""
import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    AllRejected,
    DegenerateAnnotator,
    EmptyTable,
    OrphanVideo,
    ParseError,
    TooFewAnnotators,
)

RAW_MIN, RAW_MAX = 1.0, 10.0


@dataclass(frozen=True)
class AnnotationTable:
    scores: np.ndarray  # (M videos, I annotators)
    video_ids: tuple
    annotator_ids: tuple
    missing_mask: np.ndarray = None
    kind: str = "raw"  # "raw" or "zscore"

    def __post_init__(self):
        scores = np.array(self.scores, dtype=np.float64)
        if scores.ndim != 2:
            raise ValueError(f"scores must be 2-D, got shape {scores.shape}")
        mask = np.isnan(scores) if self.missing_mask is None else np.array(self.missing_mask, dtype=bool)
        if mask.shape != scores.shape:
            raise ValueError("missing_mask shape does not match scores")
        if len(self.video_ids) != scores.shape[0] or len(self.annotator_ids) != scores.shape[1]:
            raise ValueError("id lists do not match the score matrix dimensions")
        if self.kind not in ("raw", "zscore"):
            raise ValueError(f"unknown table kind {self.kind!r}")
        scores = np.where(mask, np.nan, scores)
        present = scores[~mask]
        if not np.all(np.isfinite(present)):
            raise ValueError("non-missing scores must be finite")
        if self.kind == "raw" and present.size and (present.min() < RAW_MIN or present.max() > RAW_MAX):
            raise ValueError(f"raw scores must lie in [{RAW_MIN:g}, {RAW_MAX:g}]")
        scores.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "missing_mask", mask)
        object.__setattr__(self, "video_ids", tuple(self.video_ids))
        object.__setattr__(self, "annotator_ids", tuple(self.annotator_ids))

    @property
    def shape(self):
        return self.scores.shape

    def select_annotators(self, ids):
        idx = [self.annotator_ids.index(a) for a in ids]
        return replace(
            self,
            scores=self.scores[:, idx],
            missing_mask=self.missing_mask[:, idx],
            annotator_ids=tuple(ids),
        )


@dataclass(frozen=True)
class ScreeningConfig:
    reject_ratio: float = 0.05  # r1
    symmetry_ratio: float = 0.3  # r2
    kurtosis_low: float = 2.0
    kurtosis_high: float = 4.0
    normal_width: float = 2.0
    non_normal_width: float = math.sqrt(20.0)


@dataclass(frozen=True)
class AnnotatorStats:
    p: int
    q: int
    ratio1: float
    ratio2: float


@dataclass(frozen=True)
class ScreeningReport:
    rejected_annotators: tuple
    per_annotator_stats: dict
    kurtosis_per_video: tuple

    def to_dict(self):
        def _num(x):
            return None if isinstance(x, float) and math.isnan(x) else x

        return {
            "rejected_annotators": list(self.rejected_annotators),
            "per_annotator": {
                str(a): {"P": s.p, "Q": s.q, "ratio1": _num(s.ratio1), "ratio2": _num(s.ratio2)}
                for a, s in self.per_annotator_stats.items()
            },
            "kurtosis_per_video": [_num(float(k)) for k in self.kurtosis_per_video],
        }


@dataclass(frozen=True)
class MosVector:
    video_ids: tuple
    mos: np.ndarray
    support_counts: np.ndarray = field(default=None)


def _check_nonempty(table):
    if table.scores.size == 0 or table.missing_mask.all():
        raise EmptyTable("annotation table has no scores")


def zscore_normalize(raw):
    """Standardize each annotator column over its non-missing scores.

    Uses the population standard deviation so every output column has
    exactly zero mean and unit variance.
    """
    _check_nonempty(raw)
    present = ~raw.missing_mask
    out = np.full(raw.shape, np.nan)
    for i, ann in enumerate(raw.annotator_ids):
        col = raw.scores[present[:, i], i]
        if col.size < 2:
            raise DegenerateAnnotator(f"annotator {ann!r} has fewer than 2 scores")
        mu = col.mean()
        sigma = np.sqrt(np.mean((col - mu) ** 2))
        if sigma == 0.0:
            raise DegenerateAnnotator(f"annotator {ann!r} has zero score variance")
        out[present[:, i], i] = (col - mu) / sigma
    return replace(raw, scores=out, kind="zscore")


def _video_bounds(row, cfg):
    """Mean, half-width and kurtosis for one video's non-missing scores."""
    n = row.size
    if n < 2:
        return (row.mean() if n else np.nan), 0.0, np.nan
    mu = row.mean()
    dev = row - mu
    m2 = np.mean(dev ** 2)
    sd = np.sqrt(np.sum(dev ** 2) / (n - 1))
    if m2 == 0.0:
        return mu, 0.0, np.nan
    beta2 = np.mean(dev ** 4) / m2 ** 2
    width = cfg.normal_width if cfg.kurtosis_low <= beta2 <= cfg.kurtosis_high else cfg.non_normal_width
    return mu, width * sd, beta2


def bt500_screen(table, thresholds=None):
    """ITU-R BT.500 observer rejection.

    Per video: mean, sample standard deviation and kurtosis ``beta2``.
    The acceptance band is ``mean +/- 2 sd`` when ``2 <= beta2 <= 4`` and
    ``mean +/- sqrt(20) sd`` otherwise. ``P``/``Q`` count an annotator's
    scores strictly above/below the band. An annotator is rejected when
    ``(P + Q) / M > r1`` and ``|P - Q| / (P + Q) < r2``, where ``M`` is the
    number of videos they scored.

    Returns the table with rejected columns masked out and the report.
    """
    cfg = thresholds or ScreeningConfig()
    m, n_ann = table.shape
    if n_ann < 2:
        raise TooFewAnnotators(f"screening needs at least 2 annotators, got {n_ann}")
    _check_nonempty(table)
    present = ~table.missing_mask
    above = np.zeros(table.shape, dtype=bool)
    below = np.zeros(table.shape, dtype=bool)
    kurt = np.full(m, np.nan)
    for v in range(m):
        row = table.scores[v, present[v]]
        mu, half, kurt[v] = _video_bounds(row, cfg)
        above[v] = present[v] & (table.scores[v] > mu + half)
        below[v] = present[v] & (table.scores[v] < mu - half)

    stats, rejected = {}, []
    for i, ann in enumerate(table.annotator_ids):
        p, q = int(above[:, i].sum()), int(below[:, i].sum())
        rated = int(present[:, i].sum())
        r1 = (p + q) / rated if rated else 0.0
        r2 = abs(p - q) / (p + q) if p + q else float("nan")
        stats[ann] = AnnotatorStats(p, q, r1, r2)
        if p + q and r1 > cfg.reject_ratio and r2 < cfg.symmetry_ratio:
            rejected.append(ann)

    if len(rejected) == n_ann:
        raise AllRejected("every annotator was rejected; the table is likely corrupt")
    mask = table.missing_mask.copy()
    for ann in rejected:
        mask[:, table.annotator_ids.index(ann)] = True
    screened = replace(table, missing_mask=mask)
    return screened, ScreeningReport(tuple(rejected), stats, tuple(kurt))


def aggregate_mos(table):
    present = ~table.missing_mask
    counts = present.sum(axis=1)
    orphans = [table.video_ids[v] for v in np.flatnonzero(counts == 0)]
    if orphans:
        raise OrphanVideo(f"videos with no surviving scores: {orphans[:5]}")
    sums = np.where(present, table.scores, 0.0).sum(axis=1)
    return MosVector(table.video_ids, sums / counts, counts.astype(int))


def process_study(raw, order="raw-first", thresholds=None):
    """Screen, normalize and aggregate.

    ``order="raw-first"`` screens raw scores then z-scores the survivors
    (classic BT.500 order); ``"z-first"`` z-scores first and screens the
    normalized table.
    """
    if order == "raw-first":
        screened, report = bt500_screen(raw, thresholds)
        kept = [a for a in raw.annotator_ids if a not in report.rejected_annotators]
        normalized = zscore_normalize(raw.select_annotators(kept))
    elif order == "z-first":
        normalized, report = bt500_screen(zscore_normalize(raw), thresholds)
        kept = [a for a in raw.annotator_ids if a not in report.rejected_annotators]
        normalized = normalized.select_annotators(kept)
    else:
        raise ValueError(f"unknown screening order {order!r}")
    return aggregate_mos(normalized), report


def read_annotation_table(path, kind="raw"):
    """Read a delimited table: header row of annotator ids, first column
    video ids, numeric or empty cells. Tab is used if the header contains
    one, comma otherwise."""
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise EmptyTable(f"{path}: no rows")
    delim = "\t" if "\t" in lines[0] else ","
    rows = list(csv.reader(lines, delimiter=delim))
    header, body = rows[0], rows[1:]
    annotators = header[1:]
    if not body or not annotators:
        raise EmptyTable(f"{path}: no scores")
    video_ids, scores = [], []
    for ln, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}:{ln}: expected {len(header)} cells, got {len(row)}")
        video_ids.append(row[0])
        try:
            scores.append([float(c) if c.strip() else np.nan for c in row[1:]])
        except ValueError as exc:
            raise ParseError(f"{path}:{ln}: {exc}") from None
    return AnnotationTable(np.array(scores), video_ids, annotators, kind=kind)


def write_annotation_table(table, path, delimiter="\t"):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["video_id", *table.annotator_ids])
        for v, vid in enumerate(table.video_ids):
            w.writerow([vid] + ["" if table.missing_mask[v, i] else repr(float(s))
                                for i, s in enumerate(table.scores[v])])


def write_mos(mos, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("video_id\tmos\tsupport\n")
        for vid, val, n in zip(mos.video_ids, mos.mos, mos.support_counts):
            fh.write(f"{vid}\t{float(val)!r}\t{int(n)}\n")


def write_screening_report(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
