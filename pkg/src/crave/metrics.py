"""Evaluation statistics: SRCC, PLCC, KRCC (tau-b), quartic fitting and folds."""
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from . import kernels
from .errors import AllTied, ConstantInput, RankDeficient, TooFewItems


@dataclass(frozen=True)
class CorrelationReport:
    srcc: float
    plcc: float
    krcc: float
    n: int
    plcc_poly4: float = None  # PLCC after the quartic mapping, when computable

    def to_dict(self):
        return asdict(self)


def _pair(pred, target):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.shape != target.shape:
        raise ValueError(f"length mismatch: {pred.size} vs {target.size}")
    if pred.size < 2:
        raise TooFewItems("correlation needs at least 2 samples")
    return pred, target


def plcc(pred, target):
    pred, target = _pair(pred, target)
    p = pred - pred.mean()
    t = target - target.mean()
    sp, st = np.sqrt(np.dot(p, p)), np.sqrt(np.dot(t, t))
    if sp == 0 or st == 0:
        raise ConstantInput("Pearson correlation of a constant vector is undefined")
    return float(np.clip(np.dot(p, t) / (sp * st), -1.0, 1.0))


def srcc(pred, target):
    """Spearman correlation: Pearson on average ranks (ties share the mean rank)."""
    pred, target = _pair(pred, target)
    return plcc(rankdata(pred), rankdata(target))


def krcc(pred, target):
    """Kendall tau-b with tie corrections."""
    pred, target = _pair(pred, target)
    conc, disc, tied_pred, tied_target, _ = kernels.kendall_counts(pred, target)
    denom = np.sqrt(float(conc + disc + tied_target) * float(conc + disc + tied_pred))
    if denom == 0:
        raise AllTied("Kendall tau-b is undefined when one input is entirely tied")
    return float((conc - disc) / denom)


def poly4_fit(pred, target):
    """Least-squares quartic mapping ``pred -> target``.

    Returns coefficients in ascending order ``(c0, c1, c2, c3, c4)``.
    Solved through the normal equations on a column-scaled design matrix.
    """
    x, y = _pair(pred, target)
    if x.size < 5:
        raise TooFewItems("a quartic fit needs at least 5 points")
    design = np.vander(x, 5, increasing=True)
    scale = np.linalg.norm(design, axis=0)
    if np.any(scale == 0):
        raise RankDeficient("design matrix has an all-zero column")
    a = design / scale
    if np.linalg.matrix_rank(a) < 5:
        raise RankDeficient("need at least 5 distinct predictor values")
    gram = a.T @ a
    coef = np.linalg.solve(gram, a.T @ y)
    return coef / scale


def poly4_eval(coef, x):
    return np.polynomial.polynomial.polyval(np.asarray(x, dtype=np.float64), coef)


def poly4_curve(pred, target, samples=100):
    """Fitted curve samples ``(x, y_hat)`` spanning the predictor range."""
    coef = poly4_fit(pred, target)
    xs = np.linspace(np.min(pred), np.max(pred), samples)
    return xs, poly4_eval(coef, xs)


def correlation_report(pred, target):
    pred, target = _pair(pred, target)
    mapped = None
    try:
        mapped = plcc(poly4_eval(poly4_fit(pred, target), pred), target)
    except (RankDeficient, TooFewItems, ConstantInput):
        pass
    return CorrelationReport(srcc(pred, target), plcc(pred, target), krcc(pred, target), int(pred.size), mapped)


def mean_report(reports):
    reports = list(reports)
    mapped = [r.plcc_poly4 for r in reports]
    return CorrelationReport(
        srcc=float(np.mean([r.srcc for r in reports])),
        plcc=float(np.mean([r.plcc for r in reports])),
        krcc=float(np.mean([r.krcc for r in reports])),
        n=int(sum(r.n for r in reports)),
        plcc_poly4=None if any(m is None for m in mapped) else float(np.mean(mapped)),
    )


def write_report(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_plot_data(path, pred, target, samples=100):
    """Two sections: fitted curve ``x, y_fit`` then raw scatter ``pred, mos``."""
    xs, ys = poly4_curve(pred, target, samples)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# curve\nx\ty_fit\n")
        for a, b in zip(xs, ys):
            fh.write(f"{a!r}\t{b!r}\n")
        fh.write("# scatter\npred\tmos\n")
        for a, b in zip(np.asarray(pred, float), np.asarray(target, float)):
            fh.write(f"{a!r}\t{b!r}\n")


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: tuple
    seed: int

    def test_indices(self, fold):
        return [i for i, f in enumerate(self.assignments) if f == fold]

    def train_indices(self, fold):
        return [i for i, f in enumerate(self.assignments) if f != fold]

    def folds(self):
        return [self.test_indices(f) for f in range(self.k)]


def make_folds(n, k=10, seed=0):
    """Seeded shuffle, then round-robin fold assignment."""
    if k < 1 or n < k:
        raise TooFewItems(f"cannot split {n} items into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    assign = np.empty(n, dtype=int)
    assign[perm] = np.arange(n) % k
    return FoldPlan(k, tuple(int(a) for a in assign), seed)
