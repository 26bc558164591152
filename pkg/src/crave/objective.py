"""Training losses: PLCC loss, pairwise hinge rank loss and their weighted sum."""
from dataclasses import dataclass

import torch

from .errors import BatchTooSmall, ConstantTarget


@dataclass(frozen=True)
class LossConfig:
    gamma: float = 0.3
    rank_margin: float = 0.0
    eps: float = 1e-8

    def __post_init__(self):
        if self.gamma < 0 or self.rank_margin < 0 or self.eps <= 0:
            raise ValueError("gamma and rank_margin must be >= 0, eps > 0")


def _check_batch(pred, target):
    pred = torch.as_tensor(pred)
    target = torch.as_tensor(target, dtype=pred.dtype)
    if pred.ndim != 1 or pred.shape != target.shape:
        raise ValueError(f"pred and target must be equal-length vectors, got {tuple(pred.shape)} and {tuple(target.shape)}")
    if pred.shape[0] < 2:
        raise BatchTooSmall("correlation losses need a batch of at least 2")
    return pred, target


def plcc_loss(pred, target, cfg=None):
    """``(1 - r) / 2`` with ``r`` the Pearson correlation; lies in [0, 1].

    Prediction spread is floored at ``eps`` so a collapsed batch still
    yields a finite loss.
    """
    cfg = cfg or LossConfig()
    pred, target = _check_batch(pred, target)
    if torch.all(target == target[0]):
        raise ConstantTarget("target batch is constant")
    p = pred - pred.mean()
    t = target - target.mean()
    sp = torch.clamp(torch.sqrt(torch.mean(p * p)), min=cfg.eps)
    st = torch.clamp(torch.sqrt(torch.mean(t * t)), min=cfg.eps)
    r = torch.mean(p * t) / (sp * st)
    return (1.0 - r) / 2.0


def rank_loss(pred, target, cfg=None):
    """Mean of ``max(0, margin - (pred_i - pred_j))`` over pairs with ``target_i > target_j``."""
    cfg = cfg or LossConfig()
    pred, target = _check_batch(pred, target)
    ordered = target[:, None] > target[None, :]
    if not torch.any(ordered):
        return pred.sum() * 0.0
    diff = pred[:, None] - pred[None, :]
    hinge = torch.clamp(cfg.rank_margin - diff, min=0.0)
    return hinge[ordered].mean()


def total_loss(pred, target, cfg=None):
    cfg = cfg or LossConfig()
    return plcc_loss(pred, target, cfg) + cfg.gamma * rank_loss(pred, target, cfg)
