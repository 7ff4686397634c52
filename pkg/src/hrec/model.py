"""Whole-network assembly: SegNet -> VideoNet -> HighlightNet (+ shuffle head)."""

from __future__ import annotations

import numpy as np

from .autodiff import ParamSet, ShapeError, Tensor
from .config import TrainConfig
from .dataset import Dataset, VideoRecord
from .highlightnet import init_highlight, predict_importance
from .segnet import init_segnet, segnet_forward
from .selfsup import init_head
from .videonet import augment_portions, encode_video, init_videonet

SCOPES = ("segnet", "videonet", "highlight", "selfsup")


def init_params(config: TrainConfig, dims: dict, seed: int | None = None, dtype=np.float32) -> ParamSet:
    """Fresh parameters: uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    parts = {
        "segnet": init_segnet(rng, dims["fd"], dims["wd"], config.sfd, config.kernel_size),
        "videonet": init_videonet(rng, config.sfd, config.d_h, config.vd, config.gru_layers),
        "highlight": init_highlight(rng, config.sfd, config.vd),
        "selfsup": init_head(rng, config.d_h),
    }
    flat = {f"{scope}.{k}": v.astype(dtype) for scope, sub in parts.items() for k, v in sub.items()}
    return ParamSet(flat)


def check_compatible(params: ParamSet, config: TrainConfig, dims: dict) -> None:
    """Raise ``ShapeError`` if ``params`` does not fit ``config`` and ``dims``."""
    expected = init_params(config, dims, seed=0)
    if set(expected) != set(params):
        diff = sorted(set(expected) ^ set(params))
        raise ShapeError(f"incompatible checkpoint: parameter paths differ (e.g. {diff[0]})")
    for path, t in expected.items():
        if params[path].shape != t.shape:
            raise ShapeError(
                f"incompatible checkpoint: {path} has shape {list(params[path].shape)}, expected {list(t.shape)}"
            )


def dropout_mask(rng: np.random.Generator, shape: tuple[int, ...], p: float, dtype) -> np.ndarray | None:
    if p <= 0:
        return None
    keep = rng.random(shape) >= p
    return (keep / (1 - p)).astype(dtype)


def embed_segments(params: ParamSet, record: VideoRecord, mask: np.ndarray | None = None) -> Tensor:
    dtype = params["segnet.out.W"].dtype
    frames = Tensor(record.frame_features.astype(dtype, copy=False))
    feats = Tensor(record.segment_features.astype(dtype, copy=False))
    return segnet_forward(frames, feats, params.scope("segnet"), mask)


def video_context(params: ParamSet, segments: Tensor, portions: int = 1, seed: int = 0) -> Tensor:
    videonet = params.scope("videonet")
    if portions > 1:
        return augment_portions(segments, portions, videonet, seed)
    return encode_video(segments, videonet).vector


def score_video(
    params: ParamSet, record: VideoRecord, config: TrainConfig | None = None, seed: int = 0
) -> np.ndarray:
    """Inference-mode importance scores (model units) for one video."""
    segments = embed_segments(params, record)
    portions = config.portions if config is not None and config.augment_at_inference else 1
    context = video_context(params, segments, portions, seed)
    return predict_importance(segments, context, params.scope("highlight")).data


def predict_dataset(
    params: ParamSet, ds: Dataset, config: TrainConfig | None = None, divisor: float = 1.0
) -> dict[str, np.ndarray]:
    """Scores per video id, rescaled to importance units by ``divisor``."""
    out = {}
    for rec in ds:
        scores = score_video(params, rec, config).astype(np.float64)
        out[rec.video_id] = scores * divisor
    return out
