"""Segment encoder.

Two valid temporal convolutions squeeze a segment's frame-feature sequence
into one frame-based vector; a bottleneck block with a linear skip path
then fuses it with the segment's precomputed feature vector.
"""

from __future__ import annotations

import math

import numpy as np

from .autodiff import (
    ParamSet,
    ShapeError,
    Tensor,
    add,
    concat,
    glorot_uniform,
    linear,
    mul,
    pool_temporal,
    relu,
    temporal_conv1d,
)


def bottleneck_width(sfd: int) -> int:
    return math.ceil(sfd / 4)


def init_segnet(rng: np.random.Generator, fd: int, wd: int, sfd: int, kernel_size: int = 3) -> dict[str, np.ndarray]:
    k = kernel_size
    u = sfd + wd
    nb = bottleneck_width(sfd)
    shapes = {
        "conv1.kernel": ((k, fd, sfd), k * fd, k * sfd),
        "conv2.kernel": ((k, sfd, sfd), k * sfd, k * sfd),
        "proj.W": ((sfd, sfd), sfd, sfd),
        "fuse.down.W": ((u, nb), u, nb),
        "fuse.up.W": ((nb, sfd), nb, sfd),
        "fuse.skip.W": ((u, sfd), u, sfd),
        "out.W": ((sfd, sfd), sfd, sfd),
    }
    params = {}
    for name, (shape, fan_in, fan_out) in shapes.items():
        params[name] = glorot_uniform(rng, shape, fan_in, fan_out)
        bias = name.rsplit(".", 1)[0] + (".bias" if name.endswith("kernel") else ".b")
        params[bias] = np.zeros(shape[-1])
    return params


def encode_frames(frames: Tensor, params: ParamSet) -> Tensor:
    """Map ``[..., T_G, fd]`` frame sequences to ``[..., sfd]`` vectors."""
    k = params["conv1.kernel"].shape[0]
    footprint = 2 * k - 1
    if frames.shape[-2] < footprint:
        raise ShapeError(f"sequence shorter than kernel footprint (T_G={frames.shape[-2]}, need {footprint})")
    h = relu(temporal_conv1d(frames, params["conv1.kernel"], 1, params["conv1.bias"]))
    h = relu(temporal_conv1d(h, params["conv2.kernel"], 1, params["conv2.bias"]))
    return linear(pool_temporal(h, "mean"), params["proj.W"], params["proj.b"])


def fuse_segment(frame_vec: Tensor, seg_feat: Tensor, params: ParamSet, dropout_mask: np.ndarray | None = None) -> Tensor:
    """Fuse frame-based and precomputed segment vectors into one embedding."""
    expected = params["fuse.down.W"].shape[0]
    if frame_vec.shape[-1] + seg_feat.shape[-1] != expected:
        raise ShapeError(
            f"fuse_segment: widths {frame_vec.shape[-1]} + {seg_feat.shape[-1]} != fusion input {expected}"
        )
    u = concat([frame_vec, seg_feat], axis=-1)
    down = relu(linear(u, params["fuse.down.W"], params["fuse.down.b"]))
    h = linear(down, params["fuse.up.W"], params["fuse.up.b"])
    h = add(h, linear(u, params["fuse.skip.W"], params["fuse.skip.b"]))
    if dropout_mask is not None:
        h = mul(h, Tensor(dropout_mask.astype(h.dtype)))
    return linear(h, params["out.W"], params["out.b"])


def segnet_forward(
    frames: Tensor, seg_feats: Tensor, params: ParamSet, dropout_mask: np.ndarray | None = None
) -> Tensor:
    """Embeddings ``[T_N, sfd]`` for every segment of one video."""
    return fuse_segment(encode_frames(frames, params), seg_feats, params, dropout_mask)
