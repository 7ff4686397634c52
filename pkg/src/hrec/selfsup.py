"""Shuffle-based odd-position detection task."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ParamSet, ShapeError, Tensor, add, bce_loss, glorot_uniform, linear, reshape, scale, take
from .dataset import round_half_up


@dataclass(frozen=True)
class ShufflePlan:
    selected_positions: np.ndarray  # sorted
    permutation: np.ndarray  # permutation[i] is the source position moved into selected_positions[i]
    seed: int


def num_selected(t_n: int, alpha: float) -> int:
    if alpha <= 0:
        return 0
    return max(2, round_half_up(alpha * t_n))


def _derangement(rng: np.random.Generator, n: int) -> np.ndarray:
    while True:
        perm = rng.permutation(n)
        if not (perm == np.arange(n)).any():
            return perm


def plan_shuffle(t_n: int, alpha: float, seed: int) -> ShufflePlan:
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    n = num_selected(t_n, alpha)
    if n and t_n < 2:
        raise ValueError(f"cannot shuffle a sequence of length {t_n}")
    rng = np.random.default_rng(seed)
    selected = np.sort(rng.choice(t_n, size=n, replace=False)) if n else np.zeros(0, dtype=np.int64)
    source = selected[_derangement(rng, n)] if n else selected.copy()
    return ShufflePlan(selected, source, seed)


def shuffle_order(t_n: int, plan: ShufflePlan) -> np.ndarray:
    order = np.arange(t_n)
    order[plan.selected_positions] = plan.permutation
    return order


def odd_labels(t_n: int, plan: ShufflePlan) -> np.ndarray:
    labels = np.zeros(t_n, dtype=np.int8)
    labels[plan.selected_positions] = 1
    return labels


def shuffle_segments(segments, alpha: float, seed: int):
    """Derange a fraction ``alpha`` of the rows of ``segments``.

    Accepts an ndarray or a :class:`Tensor` (the shuffle is then recorded
    in the graph).  Returns ``(shuffled, labels, plan)`` where ``labels``
    marks the rows that no longer sit at their original position.
    """
    t_n = segments.shape[0]
    plan = plan_shuffle(t_n, alpha, seed)
    labels = odd_labels(t_n, plan)
    if plan.selected_positions.size == 0:
        return segments, labels, plan
    order = shuffle_order(t_n, plan)
    if isinstance(segments, Tensor):
        shuffled = take(segments, order)
    else:
        shuffled = np.asarray(segments)[order]
    return shuffled, labels, plan


def init_head(rng: np.random.Generator, d_h: int) -> dict[str, np.ndarray]:
    return {"W": glorot_uniform(rng, (2 * d_h, 1), 2 * d_h, 1), "b": np.zeros(1)}


def head_logits(per_step: Tensor, head: ParamSet) -> Tensor:
    if per_step.data.ndim != 2 or per_step.shape[1] != head["W"].shape[0]:
        raise ShapeError(f"selfsup head: per_step{list(per_step.shape)} vs W{list(head['W'].shape)}")
    return reshape(linear(per_step, head["W"], head["b"]), (per_step.shape[0],))


def selfsup_loss(per_step: Tensor, head: ParamSet, labels) -> Tensor:
    labels = np.asarray(labels)
    if labels.shape != (per_step.shape[0],):
        raise ShapeError(f"selfsup_loss: {per_step.shape[0]} steps vs {labels.shape} labels")
    return bce_loss(head_logits(per_step, head), labels)


def multitask_loss(sup: Tensor, self_loss: Tensor, beta: float) -> Tensor:
    """``sup + beta * self_loss``."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if not (np.isfinite(sup.data) and np.isfinite(self_loss.data)):
        raise ValueError("multitask_loss: non-finite term")
    return add(sup, scale(self_loss, beta))


def selfsup_metrics(logits, labels) -> dict[str, float]:
    """Sign-threshold accuracy and recall on the displaced (positive) rows."""
    logits = np.asarray(logits.data if isinstance(logits, Tensor) else logits)
    labels = np.asarray(labels).astype(bool)
    if logits.shape != labels.shape:
        raise ShapeError(f"selfsup_metrics: {logits.shape} logits vs {labels.shape} labels")
    pred = logits > 0
    positives = labels.sum()
    return {
        "accuracy": float((pred == labels).mean()),
        "recall_on_odd": float((pred & labels).sum() / positives) if positives else 1.0,
    }
