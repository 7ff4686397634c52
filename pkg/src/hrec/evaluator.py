"""Top-k summary evaluation, random baseline, and linear-regression ensembling."""

from __future__ import annotations

import csv
import json
import math
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset

DEFAULT_NS = 6


class EvaluationError(ValueError):
    pass


def top_k_summary(scores, k: int) -> list[int]:
    """Sorted indices of the ``k`` largest scores; ties go to the lower index."""
    scores = np.asarray(scores)
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, scores.size)
    # stable sort on the negated scores keeps lower indices first among ties
    order = np.argsort(-scores, kind="stable")
    return sorted(int(i) for i in order[:k])


@dataclass
class SummaryScoreReport:
    ratios: dict[str, float]
    mean: float
    n_videos: int
    n_s: int

    def to_json(self) -> str:
        return json.dumps(
            {"mean": self.mean, "n_s": self.n_s, "n_videos": self.n_videos, "ratios": self.ratios},
            indent=1,
            sort_keys=True,
        )


def video_ratio(importance, submission: Sequence[int], n_s: int) -> float:
    importance = np.asarray(importance, dtype=np.float64)
    t_n = importance.size
    if t_n < n_s:
        raise EvaluationError(f"video has {t_n} segments, fewer than N_s={n_s}")
    sub = [int(i) for i in submission]
    if len(sub) != n_s or len(set(sub)) != n_s:
        raise EvaluationError(f"submission must hold {n_s} distinct indices, got {sub}")
    if min(sub) < 0 or max(sub) >= t_n:
        raise EvaluationError(f"submission index out of range [0, {t_n}): {sub}")
    gt_sum = importance[top_k_summary(importance, n_s)].sum()
    sub_sum = importance[sorted(sub)].sum()
    if gt_sum == 0:
        # every subset sums to zero when the top N_s do
        return 1.0
    return float(sub_sum / gt_sum)


def summary_score(
    submissions: Mapping[str, Sequence[int]],
    ground_truth: Mapping[str, np.ndarray],
    n_s: int = DEFAULT_NS,
) -> SummaryScoreReport:
    """Mean over videos of submitted importance sum / top-``n_s`` importance sum."""
    missing = sorted(set(ground_truth) - set(submissions))
    if missing:
        raise EvaluationError(f"no submission for video {missing[0]!r}")
    ratios = {vid: video_ratio(ground_truth[vid], submissions[vid], n_s) for vid in sorted(ground_truth)}
    if not ratios:
        raise EvaluationError("no videos to score")
    mean = math.fsum(ratios.values()) / len(ratios)
    return SummaryScoreReport(ratios, mean, len(ratios), n_s)


def score_predictions(
    predictions: Mapping[str, np.ndarray], ds: Dataset, n_s: int = DEFAULT_NS
) -> SummaryScoreReport:
    """Select the top ``n_s`` predicted segments per video and score them."""
    gt = {r.video_id: r.importance for r in ds}
    subs = {}
    for vid in gt:
        if vid not in predictions:
            raise EvaluationError(f"no predictions for video {vid!r}")
        if len(predictions[vid]) != gt[vid].size:
            raise EvaluationError(f"{vid}: {len(predictions[vid])} predictions for {gt[vid].size} segments")
        subs[vid] = top_k_summary(predictions[vid], n_s)
    return summary_score(subs, gt, n_s)


def random_baseline(
    ds: Dataset | Mapping[str, np.ndarray],
    n_s: int = DEFAULT_NS,
    trials: int = 1000,
    seed: int = 0,
    mode: str = "sample",
) -> dict:
    """Summary score of uniformly random ``n_s``-subsets.

    ``mode="sample"`` draws ``trials`` subsets per video and reports the
    mean and standard deviation of the dataset score across trials.
    ``mode="exact"`` returns the expectation and the exact standard
    deviation of one trial's dataset score (sampling without replacement).
    """
    if isinstance(ds, Dataset):
        gt = {r.video_id: np.asarray(r.importance, dtype=np.float64) for r in ds}
    else:
        gt = {k: np.asarray(v, dtype=np.float64) for k, v in ds.items()}
    if not gt:
        raise EvaluationError("no videos to score")
    ids = sorted(gt)
    for vid in ids:
        if gt[vid].size < n_s:
            raise EvaluationError(f"video {vid!r} has {gt[vid].size} segments, fewer than N_s={n_s}")
    if mode == "exact":
        means, variances = [], []
        for vid in ids:
            a = gt[vid]
            t_n = a.size
            gt_sum = a[top_k_summary(a, n_s)].sum()
            if gt_sum == 0:
                means.append(1.0)
                variances.append(0.0)
                continue
            means.append(n_s * a.mean() / gt_sum)
            var_sum = n_s * a.var() * (t_n - n_s) / (t_n - 1) if t_n > 1 else 0.0
            variances.append(var_sum / gt_sum**2)
        n = len(ids)
        return {
            "mode": "exact",
            "mean": math.fsum(means) / n,
            "std": math.sqrt(math.fsum(variances)) / n,
            "trials": None,
        }
    if mode != "sample":
        raise ValueError(f"unknown baseline mode {mode!r}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    scores = np.empty(trials)
    for t in range(trials):
        subs = {vid: rng.choice(gt[vid].size, size=n_s, replace=False) for vid in ids}
        scores[t] = summary_score(subs, gt, n_s).mean
    return {"mode": "sample", "mean": float(scores.mean()), "std": float(scores.std()), "trials": trials}


# ---------------------------------------------------------------------------
# ensembling


@dataclass
class EnsembleWeights:
    coefficients: np.ndarray
    intercept: float
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "coefficients": [float(c) for c in self.coefficients],
            "intercept": float(self.intercept),
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> EnsembleWeights:
        return cls(np.asarray(d["coefficients"], dtype=np.float64), float(d["intercept"]), list(d.get("flags", [])))


RIDGE_LAMBDA = 1e-8


def fit_linear_regression(model_preds, targets) -> EnsembleWeights:
    """Least squares with intercept over pooled segments.

    ``model_preds`` is ``[M, S]``.  Predictors are centred so the intercept
    is unpenalised; on a rank-deficient design a ridge term of 1e-8 is
    added to the normal equations.
    """
    X = np.atleast_2d(np.asarray(model_preds, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64)
    m, s = X.shape
    if y.shape != (s,):
        raise ValueError(f"targets length {y.shape} does not match {s} pooled segments")
    if s <= m + 1:
        raise ValueError(f"need more than M+1={m + 1} pooled segments, got {s}")
    x_mean = X.mean(axis=1)
    y_mean = y.mean()
    Xc = (X - x_mean[:, None]).T
    yc = y - y_mean
    gram = Xc.T @ Xc
    flags = [f"model {i} is constant" for i in range(m) if np.ptp(X[i]) == 0]
    if np.linalg.matrix_rank(Xc) < m:
        flags.append("rank-deficient design; ridge fallback applied")
        gram = gram + RIDGE_LAMBDA * np.eye(m)
        warnings.warn(flags[-1], RuntimeWarning, stacklevel=2)
    coef = np.linalg.solve(gram, Xc.T @ yc)
    return EnsembleWeights(coef, float(y_mean - coef @ x_mean), flags)


def ensemble_predict(model_preds, weights: EnsembleWeights) -> np.ndarray:
    X = np.atleast_2d(np.asarray(model_preds, dtype=np.float64))
    if X.shape[0] != weights.coefficients.size:
        raise ValueError(f"{X.shape[0]} models given, weights hold {weights.coefficients.size}")
    return weights.intercept + weights.coefficients @ X


def select_models(weights: EnsembleWeights, rel_threshold: float = 0.05) -> list[int]:
    """Indices of models whose |coefficient| is at least ``rel_threshold`` of the largest."""
    mags = np.abs(weights.coefficients)
    top = mags.max() if mags.size else 0.0
    if top == 0:
        return []
    return [i for i, c in enumerate(mags) if c >= rel_threshold * top]


def pool_predictions(
    per_model: Sequence[Mapping[str, np.ndarray]], ds: Dataset
) -> tuple[np.ndarray, np.ndarray]:
    """Stack several models' per-video predictions into ``[M, S]`` plus targets."""
    rows = [[] for _ in per_model]
    targets = []
    for rec in ds:
        for m, preds in enumerate(per_model):
            if rec.video_id not in preds:
                raise EvaluationError(f"model {m} has no predictions for {rec.video_id!r}")
            rows[m].append(np.asarray(preds[rec.video_id], dtype=np.float64))
        targets.append(rec.importance.astype(np.float64))
    return np.array([np.concatenate(r) for r in rows]), np.concatenate(targets)


# ---------------------------------------------------------------------------
# interchange files


def write_predictions(path: str | Path, predictions: Mapping[str, np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["video_id", "segment_index", "score"])
        for vid in sorted(predictions):
            for i, s in enumerate(predictions[vid]):
                writer.writerow([vid, i, repr(float(s))])


def read_predictions(path: str | Path) -> dict[str, np.ndarray]:
    rows: dict[str, dict[int, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["video_id", "segment_index", "score"]:
            raise EvaluationError(f"{path}: expected columns video_id,segment_index,score")
        for row in reader:
            idx = int(row["segment_index"])
            seg = rows.setdefault(row["video_id"], {})
            if idx in seg:
                raise EvaluationError(f"{path}: duplicate row for {row['video_id']} segment {idx}")
            seg[idx] = float(row["score"])
    out = {}
    for vid, seg in rows.items():
        if sorted(seg) != list(range(len(seg))):
            raise EvaluationError(f"{path}: segment indices for {vid!r} are not contiguous from 0")
        out[vid] = np.array([seg[i] for i in range(len(seg))])
    return out


def write_report(path: str | Path, report: SummaryScoreReport) -> None:
    Path(path).write_text(report.to_json() + "\n")
