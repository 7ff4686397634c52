"""Importance scoring head over (segment embedding, video context) pairs."""

from __future__ import annotations

import numpy as np

from .autodiff import ParamSet, ShapeError, Tensor, broadcast_rows, concat, glorot_uniform, linear, mse_loss, relu, reshape


def hidden_widths(sfd: int, vd: int) -> tuple[int, int]:
    width = sfd + vd
    return max(width // 2, 1), max(width // 4, 1)


def init_highlight(rng: np.random.Generator, sfd: int, vd: int) -> dict[str, np.ndarray]:
    h1, h2 = hidden_widths(sfd, vd)
    dims = [("fc1", sfd + vd, h1), ("fc2", h1, h2), ("out", h2, 1)]
    params = {}
    for name, n_in, n_out in dims:
        params[f"{name}.W"] = glorot_uniform(rng, (n_in, n_out), n_in, n_out)
        params[f"{name}.b"] = np.zeros(n_out)
    return params


def predict_importance(segments: Tensor, context: Tensor, params: ParamSet) -> Tensor:
    """Score every row of ``segments`` against the shared ``context``.

    Returns a ``[T_N]`` tensor of unbounded scores.
    """
    n_in = params["fc1.W"].shape[0]
    if segments.data.ndim != 2 or segments.shape[1] + context.shape[-1] != n_in:
        raise ShapeError(
            f"predict_importance: segments{list(segments.shape)} + context{list(context.shape)} vs input width {n_in}"
        )
    t_n = segments.shape[0]
    x = concat([segments, broadcast_rows(context, t_n)], axis=1)
    x = relu(linear(x, params["fc1.W"], params["fc1.b"]))
    x = relu(linear(x, params["fc2.W"], params["fc2.b"]))
    return reshape(linear(x, params["out.W"], params["out.b"]), (t_n,))


def supervised_loss(pred: Tensor, target) -> Tensor:
    """Per-video mean squared error."""
    return mse_loss(pred, target)
