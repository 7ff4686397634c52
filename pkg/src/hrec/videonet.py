"""Bidirectional GRU video encoder and portion-averaging augmentation."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .autodiff import (
    ParamSet,
    ShapeError,
    Tensor,
    concat,
    glorot_uniform,
    gru_cell,
    linear,
    mean,
    mul,
    stack,
    take,
)

DIRECTIONS = ("fwd", "bwd")


@dataclass
class VideoContext:
    vector: Tensor  # [vd]
    per_step: Tensor  # [T_N, 2*d_h], forward half first


def init_videonet(rng: np.random.Generator, sfd: int, d_h: int, vd: int, layers: int = 1) -> dict[str, np.ndarray]:
    params = {}
    for layer in range(layers):
        d_in = sfd if layer == 0 else 2 * d_h
        for direction in DIRECTIONS:
            prefix = f"gru.l{layer}.{direction}."
            for gate in "zrh":
                params[prefix + f"W_{gate}"] = glorot_uniform(rng, (d_in, d_h), d_in, d_h)
                params[prefix + f"U_{gate}"] = glorot_uniform(rng, (d_h, d_h), d_h, d_h)
                params[prefix + f"b_{gate}"] = np.zeros(d_h)
    params["context.W"] = glorot_uniform(rng, (2 * d_h, vd), 2 * d_h, vd)
    params["context.b"] = np.zeros(vd)
    return params


def num_layers(params: ParamSet) -> int:
    found = {int(m.group(1)) for p in params if (m := re.match(r"gru\.l(\d+)\.", p))}
    return len(found)


def _run_direction(rows: list[Tensor], cell: ParamSet, reverse: bool) -> list[Tensor]:
    d_h = cell["U_z"].shape[0]
    h = Tensor(np.zeros(d_h, dtype=cell["U_z"].dtype))
    states: list[Tensor | None] = [None] * len(rows)
    order = range(len(rows) - 1, -1, -1) if reverse else range(len(rows))
    for t in order:
        h = gru_cell(rows[t], h, cell)
        states[t] = h
    return states


def encode_video(segments: Tensor, params: ParamSet) -> VideoContext:
    """Encode ``[T_N, sfd]`` segment embeddings into a video context.

    The context is a linear projection of the last forward state
    concatenated with the last backward state (the one produced at
    position 0).
    """
    if segments.data.ndim != 2 or segments.shape[0] < 1:
        raise ShapeError(f"encode_video: need a non-empty [T_N, sfd] sequence, got {list(segments.shape)}")
    t_n = segments.shape[0]
    rows = [take(segments, t) for t in range(t_n)]
    for layer in range(num_layers(params)):
        fwd = _run_direction(rows, params.scope(f"gru.l{layer}.fwd"), reverse=False)
        bwd = _run_direction(rows, params.scope(f"gru.l{layer}.bwd"), reverse=True)
        rows = [concat([f, b]) for f, b in zip(fwd, bwd)]
    final = concat([fwd[-1], bwd[0]])
    vector = linear(final, params["context.W"], params["context.b"])
    return VideoContext(vector, stack(rows))


def swap_directions(params: ParamSet) -> ParamSet:
    """Exchange forward and backward GRU blocks (used by symmetry checks).

    Input weights of stacked layers also get their two row halves swapped,
    since their inputs are ``[fwd, bwd]`` concatenations.  Encoding the
    reversed sequence with the result reproduces the original per-step
    outputs, row-reversed and with direction halves exchanged.
    """
    swapped = {}
    for path, t in params.items():
        new = path.replace(".fwd.", ".tmp.").replace(".bwd.", ".fwd.").replace(".tmp.", ".bwd.")
        data = t.data
        if re.match(r"gru\.l[1-9]\d*\..*\.W_", path):
            half = data.shape[0] // 2
            data = np.concatenate([data[half:], data[:half]])
        swapped[new] = data
    return ParamSet(swapped)


def portion_groups(sfd: int, portions: int, seed: int) -> list[np.ndarray]:
    """Random partition of ``range(sfd)`` into near-equal disjoint groups."""
    if not 1 <= portions <= sfd:
        raise ValueError(f"portions must lie in [1, sfd={sfd}], got {portions}")
    perm = np.random.default_rng(seed).permutation(sfd)
    return [np.sort(g) for g in np.array_split(perm, portions)]


def augment_portions(segments: Tensor, portions: int, params: ParamSet, seed: int) -> Tensor:
    """Average of contexts, each encoded from one feature-coordinate portion.

    Coordinates outside the active portion are zero-filled.
    """
    sfd = segments.shape[-1]
    contexts = []
    for group in portion_groups(sfd, portions, seed):
        mask = np.zeros(sfd, dtype=segments.dtype)
        mask[group] = 1
        contexts.append(encode_video(mul(segments, Tensor(mask)), params).vector)
    return mean(stack(contexts), axis=0)

