"""Loss functions and the one-cycle learning-rate/momentum schedule.

Pure scalar/array math; nothing here owns state or gradients.
"""

from __future__ import annotations

import math

import numpy as np

FOCAL_ALPHA = 0.25
FOCAL_GAMMA = 2.0
PROB_CLAMP = 1e-12

# per-component regression weights over (x, y, z, l, w, h, yaw, vx, vy)
DEFAULT_REG_WEIGHTS = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.2, 0.2)


def focal_loss(p, y, alpha: float = FOCAL_ALPHA, gamma: float = FOCAL_GAMMA):
    """Binary focal loss; probabilities are clamped away from {0, 1}.

    With gamma = 0 this reduces exactly to alpha-weighted cross-entropy.
    """
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    pos = -alpha * (1.0 - p) ** gamma * np.log(p)
    neg = -(1.0 - alpha) * p**gamma * np.log(1.0 - p)
    out = np.where(y == 1.0, pos, neg)
    return float(out) if out.ndim == 0 else out


def smooth_l1(d, beta: float = 1.0):
    """Huber-style loss: quadratic below beta, linear above."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    d = np.abs(np.asarray(d, dtype=np.float64))
    out = np.where(d < beta, 0.5 * d * d / beta, d - 0.5 * beta)
    return float(out) if out.ndim == 0 else out


def group_loss(cls_losses, reg_losses, dir_losses, num_positives: int,
               reg_weights=DEFAULT_REG_WEIGHTS):
    """Aggregate one group's losses.

    cls_losses: per-anchor classification losses (already focal-weighted).
    reg_losses: (P, 9) per-positive, per-component regression losses.
    dir_losses: per-positive direction cross-entropy losses.
    All three terms are normalized by the positive count; with zero positives
    the regression and direction terms contribute 0.
    """
    cls_losses = np.asarray(cls_losses, dtype=np.float64)
    norm = max(num_positives, 1)
    total = float(cls_losses.sum()) / norm
    if num_positives > 0:
        reg = np.asarray(reg_losses, dtype=np.float64).reshape(-1, 9)
        weights = np.asarray(reg_weights, dtype=np.float64)
        total += float((reg * weights).sum()) / norm
        total += float(np.asarray(dir_losses, dtype=np.float64).sum()) / norm
    return total


def total_loss(group_losses) -> float:
    """Uniform scaling: the unweighted sum over groups."""
    return float(sum(group_losses))


def one_cycle(step: int, total_steps: int, lr_max: float = 0.04,
              div_factor: float = 10.0, mom_high: float = 0.95,
              mom_low: float = 0.85, pct_peak: float = 0.4,
              final_div: float = 1.0e4):
    """One-cycle schedule value at an integer step.

    Learning rate rises from lr_max/div_factor to lr_max over the first
    pct_peak fraction of steps, then anneals to lr_max/(div_factor*final_div);
    momentum mirrors it between mom_high and mom_low. Both phases are cosine
    interpolated and continuous at the peak.
    """
    if not (0 <= step <= total_steps):
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if total_steps < 1:
        raise ValueError("total_steps must be >= 1")
    peak = pct_peak * total_steps
    lr_start = lr_max / div_factor
    lr_final = lr_max / (div_factor * final_div)

    def cosine(a, b, t):
        # exact at both ends so schedule endpoints are not subject to round-off
        if t <= 0.0:
            return a
        if t >= 1.0:
            return b
        return a + (b - a) * 0.5 * (1.0 - math.cos(math.pi * t))

    if step <= peak:
        t = step / peak if peak > 0 else 1.0
        return cosine(lr_start, lr_max, t), cosine(mom_high, mom_low, t)
    t = (step - peak) / (total_steps - peak)
    return cosine(lr_max, lr_final, t), cosine(mom_low, mom_high, t)
