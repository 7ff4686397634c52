"""Seeded training loops: supervised, self-supervised pretraining, multi-task.

Batch = one video.  Every random draw (video order, dropout masks,
shuffle plans, augmentation portions) comes from a ``SeedSequence``
keyed on ``(seed, epoch, video index, purpose)``, so a run is a pure
function of its config and data.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import paramio
from .autodiff import AdamState, ParamSet, Tensor, adam_step, grad
from .config import TrainConfig
from .dataset import Dataset
from .evaluator import score_predictions
from .highlightnet import predict_importance, supervised_loss
from .model import check_compatible, dropout_mask, embed_segments, init_params, predict_dataset, video_context
from .selfsup import head_logits, multitask_loss, selfsup_loss, selfsup_metrics, shuffle_segments
from .videonet import encode_video

log = logging.getLogger(__name__)

_DROPOUT, _SHUFFLE, _PORTIONS, _EVAL_SHUFFLE, _ORDER = range(5)


class TrainingError(RuntimeError):
    pass


def _stream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def _seed_int(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# checkpoint and history


@dataclass
class Checkpoint:
    params: ParamSet
    config: TrainConfig
    adam: AdamState
    divisor: float
    epoch: int
    dims: dict

    def to_bytes(self) -> bytes:
        arrays = dict(self.params.arrays())
        for path in self.params:
            if path in self.adam.m:
                arrays[f"adam.m.{path}"] = self.adam.m[path]
                arrays[f"adam.v.{path}"] = self.adam.v[path]
        trailer = {
            "kind": "hrec-checkpoint",
            "config": self.config.to_dict(),
            "divisor": self.divisor,
            "epoch": self.epoch,
            "adam_step": self.adam.step,
            "dims": self.dims,
        }
        return paramio.dumps(arrays, trailer)

    @classmethod
    def from_bytes(cls, blob: bytes) -> Checkpoint:
        arrays, trailer = paramio.loads(blob)
        if not trailer or trailer.get("kind") != "hrec-checkpoint":
            raise paramio.FormatError("missing checkpoint trailer")
        params = {k: v for k, v in arrays.items() if not k.startswith("adam.")}
        m = {k[len("adam.m."):]: v for k, v in arrays.items() if k.startswith("adam.m.")}
        v = {k[len("adam.v."):]: a for k, a in arrays.items() if k.startswith("adam.v.")}
        return cls(
            params=ParamSet(params),
            config=TrainConfig.from_dict(trailer["config"]),
            adam=AdamState(m, v, int(trailer["adam_step"])),
            divisor=float(trailer["divisor"]),
            epoch=int(trailer["epoch"]),
            dims={k: int(x) for k, x in trailer["dims"].items()},
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> Checkpoint:
        return cls.from_bytes(Path(path).read_bytes())


HISTORY_COLUMNS = ("epoch", "train_loss", "val_loss", "val_summary_score", "selfsup_acc", "selfsup_recall")


@dataclass
class History:
    records: list[dict] = field(default_factory=list)
    best: Checkpoint | None = field(default=None, repr=False, compare=False)
    best_epoch: int | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)
        for rec in self.records:
            writer.writerow(["" if rec.get(c) is None else repr(rec[c]) for c in HISTORY_COLUMNS])
        return buf.getvalue()

    def save_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())

    def column(self, name: str) -> list:
        return [r.get(name) for r in self.records]


# ---------------------------------------------------------------------------
# losses per video


def _sup_loss(params, segments, rec, config, divisor, portions_seed) -> Tensor:
    context = video_context(params, segments, config.portions, portions_seed)
    pred = predict_importance(segments, context, params.scope("highlight"))
    target = rec.importance.astype(np.float64) / divisor
    return supervised_loss(pred, target)


def _self_loss(params, segments, alpha, shuffle_seed) -> Tensor:
    shuffled, labels, _ = shuffle_segments(segments, alpha, shuffle_seed)
    per_step = encode_video(shuffled, params.scope("videonet")).per_step
    return selfsup_loss(per_step, params.scope("selfsup"), labels)


def video_loss(params: ParamSet, rec, config: TrainConfig, mode: str, divisor: float, epoch: int, index: int) -> Tensor:
    """Training objective for one video under ``mode``."""
    dtype = params["segnet.out.W"].dtype
    mask = dropout_mask(_stream(config.seed, epoch, index, _DROPOUT), (rec.t_n, config.sfd), config.dropout_p, dtype)
    segments = embed_segments(params, rec, mask)
    shuffle_seed = _seed_int(config.seed, epoch, index, _SHUFFLE)
    if mode == "pretrain":
        return _self_loss(params, segments, config.alpha, shuffle_seed)
    sup = _sup_loss(params, segments, rec, config, divisor, _seed_int(config.seed, epoch, index, _PORTIONS))
    if mode == "supervised":
        return sup
    return multitask_loss(sup, _self_loss(params, segments, config.alpha, shuffle_seed), config.beta)


# ---------------------------------------------------------------------------
# evaluation passes (alpha forced to 0 for the importance task)


def eval_supervised(params: ParamSet, ds: Dataset, config: TrainConfig, divisor: float) -> dict:
    preds = predict_dataset(params, ds, config, 1.0)
    losses = [
        float(np.mean((preds[r.video_id] - r.importance.astype(np.float64) / divisor) ** 2)) for r in ds
    ]
    scorable = ds.subset([r for r in ds if r.t_n >= config.n_s])
    score = None
    if len(scorable):
        score = score_predictions({r.video_id: preds[r.video_id] for r in scorable}, scorable, config.n_s).mean
    return {"loss": math.fsum(losses) / len(losses), "summary_score": score}


def eval_selfsup(params: ParamSet, ds: Dataset, config: TrainConfig, alpha: float | None = None) -> dict:
    """Odd-position accuracy/recall on fixed evaluation shuffles.

    Also reports ``positive_fraction`` (share of displaced segments), so
    the majority-class accuracy is ``1 - positive_fraction``.
    """
    alpha = config.alpha if alpha is None else alpha
    logits, labels, losses = [], [], []
    for i, rec in enumerate(ds):
        segments = embed_segments(params, rec)
        shuffled, lab, _ = shuffle_segments(segments, alpha, _seed_int(config.seed, i, _EVAL_SHUFFLE))
        per_step = encode_video(shuffled, params.scope("videonet")).per_step
        lg = head_logits(per_step, params.scope("selfsup"))
        losses.append(float(selfsup_loss(per_step, params.scope("selfsup"), lab).data))
        logits.append(lg.data)
        labels.append(lab)
    logits, labels = np.concatenate(logits), np.concatenate(labels)
    metrics = selfsup_metrics(logits, labels)
    metrics["loss"] = math.fsum(losses) / len(losses)
    metrics["positive_fraction"] = float(labels.mean())
    return metrics


# ---------------------------------------------------------------------------
# loops


def _divisor(config: TrainConfig, ds: Dataset) -> float:
    if not config.normalize_targets or not len(ds):
        return 1.0
    top = max(float(r.importance.max()) for r in ds)
    return top if top > 0 else 1.0


def _check_dims(train: Dataset, val: Dataset | None) -> None:
    if val is not None and len(val) and val.dims != train.dims:
        raise TrainingError(f"train dims {train.dims} differ from validation dims {val.dims}")


def _train(
    config: TrainConfig,
    train: Dataset,
    val: Dataset | None,
    mode: str,
    init: Checkpoint | None = None,
) -> tuple[Checkpoint, History]:
    _check_dims(train, val)
    if not len(train):
        raise TrainingError("empty training set")
    if init is not None:
        check_compatible(init.params, config, train.dims)
        params = ParamSet(init.params.arrays())
    else:
        params = init_params(config, train.dims)
    divisor = _divisor(config, train)
    adam = AdamState.zeros_like(params)
    history = History()
    track_selfsup = mode == "pretrain" or (mode == "multitask" and config.beta > 0 and config.alpha > 0)
    best_key = -math.inf

    for epoch in range(1, config.epochs + 1):
        order = _stream(config.seed, epoch, _ORDER).permutation(len(train))
        losses = []
        for idx in order:
            rec = train.records[idx]
            loss = video_loss(params, rec, config, mode, divisor, epoch, int(idx))
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingError(f"non-finite loss at epoch {epoch}, video {rec.video_id!r}")
            grads = grad(loss, params)
            params, adam = adam_step(
                params, grads, adam, config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps
            )
            losses.append(value)
        record = {"epoch": epoch, "train_loss": math.fsum(losses) / len(losses)}
        key = None
        if val is not None and len(val):
            if mode != "pretrain":
                ev = eval_supervised(params, val, config, divisor)
                record["val_loss"] = ev["loss"]
                record["val_summary_score"] = ev["summary_score"]
                key = ev["summary_score"]
            if track_selfsup:
                ss = eval_selfsup(params, val, config)
                if mode == "pretrain":
                    record["val_loss"] = ss["loss"]
                    key = ss["accuracy"]
                record["selfsup_acc"] = ss["accuracy"]
                record["selfsup_recall"] = ss["recall_on_odd"]
        history.records.append(record)
        log.info("epoch %d: %s", epoch, record)
        if key is not None and key > best_key:
            best_key = key
            history.best_epoch = epoch
            history.best = Checkpoint(params, config, adam, divisor, epoch, dict(train.dims))

    return Checkpoint(params, config, adam, divisor, config.epochs, dict(train.dims)), history


def train_supervised(config: TrainConfig, train: Dataset, val: Dataset | None = None) -> tuple[Checkpoint, History]:
    """Minimise the mean per-video importance MSE."""
    return _train(config, train, val, "supervised")


def pretrain_selfsup(config: TrainConfig, data: Dataset, val: Dataset | None = None) -> tuple[Checkpoint, History]:
    """Train SegNet, VideoNet and the shuffle head on odd-position detection only.

    Importance labels are ignored; HighlightNet parameters receive zero
    gradients and so stay at their initial values.
    """
    return _train(config, data, val, "pretrain")


def train_multitask(
    config: TrainConfig,
    train: Dataset,
    val: Dataset | None = None,
    pretrained: Checkpoint | None = None,
) -> tuple[Checkpoint, History]:
    """Joint importance regression plus ``beta`` times the shuffle task."""
    return _train(config, train, val, "multitask", pretrained)
