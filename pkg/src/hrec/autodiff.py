"""Small reverse-mode differentiation layer over numpy arrays.

Only the fixed operation set needed by the summarization network is
provided.  Every op records a vector-Jacobian product closure on the
output tensor; :func:`grad` walks the recorded graph backwards.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class NonFiniteError(ValueError):
    """Raised when an op receives NaN or Inf values."""


class NondeterminismError(RuntimeError):
    """Raised by :func:`grad_check` when the loss is not a pure function."""


VJP = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    """Dense array node.  ``data`` is never mutated after construction."""

    __slots__ = ("data", "requires_grad", "parents", "vjp")

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        parents: tuple[Tensor, ...] = (),
        vjp: VJP | None = None,
    ):
        self.data = np.asarray(data)
        self.requires_grad = requires_grad
        self.parents = parents
        self.vjp = vjp

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


def as_tensor(x: Any, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _node(data: np.ndarray, parents: tuple[Tensor, ...], vjp: VJP) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, vjp)
    return Tensor(data)


def _check_finite(name: str, *arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.isfinite(a).all():
            raise NonFiniteError(f"{name}: non-finite input")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise and structural ops


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data
    return _node(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data
    return _node(
        out,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def scale(a: Tensor, c: float) -> Tensor:
    c = a.data.dtype.type(c)
    return _node(a.data * c, (a,), lambda g: (g * c,))


def sum_all(a: Tensor) -> Tensor:
    return _node(a.data.sum(), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean(a: Tensor, axis: int = 0) -> Tensor:
    n = a.shape[axis]
    out = a.data.mean(axis=axis)

    def vjp(g):
        g = np.expand_dims(g, axis) / a.data.dtype.type(n)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _node(out, (a,), vjp)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _node(out, tensors, vjp)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    out = np.stack([t.data for t in tensors], axis=axis)

    def vjp(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _node(out, tensors, vjp)


def take(a: Tensor, index) -> Tensor:
    """``a[index]`` for an int, slice, or integer array along axis 0."""
    out = a.data[index]

    def vjp(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return _node(out, (a,), vjp)


def broadcast_rows(v: Tensor, n: int) -> Tensor:
    """Repeat a vector ``[d]`` into ``[n, d]``."""
    out = np.broadcast_to(v.data, (n,) + v.shape).copy()
    return _node(out, (v,), lambda g: (g.sum(axis=0),))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = a.data.reshape(shape)
    return _node(out, (a,), lambda g: (g.reshape(a.shape),))


# ---------------------------------------------------------------------------
# layers


def linear(x: Tensor, W: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ W + b`` with x of shape ``[..., p]`` and W ``[p, q]``."""
    x, W = as_tensor(x), as_tensor(W)
    if W.data.ndim != 2 or x.data.ndim < 1 or x.shape[-1] != W.shape[0]:
        raise ShapeError(f"linear: cannot multiply x{list(x.shape)} by W{list(W.shape)}")
    if b is not None and b.shape != (W.shape[1],):
        raise ShapeError(f"linear: bias{list(b.shape)} does not match W{list(W.shape)}")
    out = x.data @ W.data
    if b is not None:
        out = out + b.data
    parents = (x, W) if b is None else (x, W, b)

    def vjp(g):
        gx = g @ W.data.T
        x2 = x.data.reshape(-1, W.shape[0])
        g2 = g.reshape(-1, W.shape[1])
        gW = x2.T @ g2
        if b is None:
            return gx, gW
        return gx, gW, g2.sum(axis=0)

    return _node(out, parents, vjp)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return _inside(out, 0.0)


def _inside(a: np.ndarray, lo: float) -> np.ndarray:
    # keep saturated outputs strictly inside (lo, 1)
    one = np.ones((), dtype=a.dtype)
    hi = np.nextafter(one, 0 * one)
    floor = np.finfo(a.dtype).tiny if lo == 0 else -hi
    return np.clip(a, floor, hi)


def activation(x: Tensor, kind: str) -> Tensor:
    _check_finite(f"activation[{kind}]", x.data)
    if kind == "relu":
        mask = x.data > 0
        return _node(np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,))
    if kind == "sigmoid":
        s = _sigmoid(x.data)
        return _node(s, (x,), lambda g: (g * s * (1 - s),))
    if kind == "tanh":
        t = _inside(np.tanh(x.data), -1.0)
        return _node(t, (x,), lambda g: (g * (1 - t * t),))
    raise ValueError(f"unknown activation {kind!r}")


def relu(x: Tensor) -> Tensor:
    return activation(x, "relu")


def temporal_conv1d(
    X: Tensor, kernels: Tensor, stride: int = 1, bias: Tensor | None = None
) -> Tensor:
    """Valid correlation along the temporal axis.

    X is ``[..., T, d]`` and kernels ``[k, d, c]``; the result is
    ``[..., T', c]`` with ``T' = (T - k) // stride + 1`` and
    ``out[t, c] = sum_j sum_d X[t*stride + j, d] * K[j, d, c]``.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    k, d, c = kernels.shape
    T = X.shape[-2]
    if X.shape[-1] != d:
        raise ShapeError(f"temporal_conv1d: X{list(X.shape)} vs kernels{list(kernels.shape)}")
    if T < k:
        raise ShapeError(f"sequence shorter than kernel (T={T}, k={k})")
    t_out = (T - k) // stride + 1
    Xd, K = X.data, kernels.data
    out = np.zeros(X.shape[:-2] + (t_out, c), dtype=np.result_type(Xd, K))
    span = stride * (t_out - 1) + 1
    for j in range(k):
        out += Xd[..., j : j + span : stride, :] @ K[j]
    if bias is not None:
        out += bias.data

    def vjp(g):
        gX = np.zeros_like(Xd)
        gK = np.empty_like(K)
        lead = g.reshape(-1, c)
        for j in range(k):
            window = Xd[..., j : j + span : stride, :]
            gK[j] = window.reshape(-1, d).T @ lead
            gX[..., j : j + span : stride, :] += g @ K[j].T
        if bias is None:
            return gX, gK
        return gX, gK, lead.sum(axis=0)

    parents = (X, kernels) if bias is None else (X, kernels, bias)
    return _node(out, parents, vjp)


def pool_temporal(X: Tensor, mode: str = "mean") -> Tensor:
    """Reduce ``[..., T, d]`` over T.  Max ties route to the first index."""
    T = X.shape[-2]
    if T < 1:
        raise ShapeError("pool_temporal: empty temporal axis")
    if mode == "mean":
        return mean(X, axis=X.data.ndim - 2)
    if mode != "max":
        raise ValueError(f"unknown pooling mode {mode!r}")
    idx = np.argmax(X.data, axis=-2)
    out = np.take_along_axis(X.data, idx[..., None, :], axis=-2)[..., 0, :]

    def vjp(g):
        full = np.zeros_like(X.data)
        np.put_along_axis(full, idx[..., None, :], g[..., None, :], axis=-2)
        return (full,)

    return _node(out, (X,), vjp)


GRU_BLOCKS = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")


def gru_cell(x_t: Tensor, h_prev: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    """One GRU step (row-vector convention, ``x @ W``).

    z = sigmoid(x W_z + h U_z + b_z), r = sigmoid(x W_r + h U_r + b_r),
    candidate = tanh(x W_h + (r * h) U_h + b_h),
    h' = (1 - z) * h + z * candidate.
    """
    W_z, U_z, b_z, W_r, U_r, b_r, W_h, U_h, b_h = (params[n] for n in GRU_BLOCKS)
    d_in, d_h = W_z.shape
    if x_t.shape != (d_in,) or h_prev.shape != (d_h,):
        raise ShapeError(
            f"gru_cell: x{list(x_t.shape)}, h{list(h_prev.shape)} vs W_z{list(W_z.shape)}"
        )
    for n in GRU_BLOCKS:
        expected = {"W": (d_in, d_h), "U": (d_h, d_h), "b": (d_h,)}[n[0]]
        if params[n].shape != expected:
            raise ShapeError(f"gru_cell: {n} has shape {list(params[n].shape)}, expected {list(expected)}")
    x, h = x_t.data, h_prev.data
    _check_finite("gru_cell", x, h)

    z = _sigmoid(x @ W_z.data + h @ U_z.data + b_z.data)
    r = _sigmoid(x @ W_r.data + h @ U_r.data + b_r.data)
    rh = r * h
    cand = _inside(np.tanh(x @ W_h.data + rh @ U_h.data + b_h.data), -1.0)
    out = (1 - z) * h + z * cand

    def vjp(g):
        dz = g * (cand - h)
        da_h = g * z * (1 - cand * cand)
        drh = da_h @ U_h.data.T
        da_r = drh * h * r * (1 - r)
        da_z = dz * z * (1 - z)
        dx = da_z @ W_z.data.T + da_r @ W_r.data.T + da_h @ W_h.data.T
        dh = g * (1 - z) + drh * r + da_z @ U_z.data.T + da_r @ U_r.data.T
        return (
            dx,
            dh,
            np.outer(x, da_z),
            np.outer(h, da_z),
            da_z,
            np.outer(x, da_r),
            np.outer(h, da_r),
            da_r,
            np.outer(x, da_h),
            np.outer(rh, da_h),
            da_h,
        )

    return _node(out, (x_t, h_prev, W_z, U_z, b_z, W_r, U_r, b_r, W_h, U_h, b_h), vjp)


# ---------------------------------------------------------------------------
# losses


def mse_loss(pred: Tensor, target: Any) -> Tensor:
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=pred.dtype)
    if pred.shape != t.shape:
        raise ShapeError(f"mse_loss: pred{list(pred.shape)} vs target{list(t.shape)}")
    if pred.data.size < 1:
        raise ShapeError("mse_loss: empty input")
    n = pred.data.size
    diff = pred.data - t
    out = np.asarray((diff * diff).sum() / n, dtype=pred.dtype)
    return _node(out, (pred,), lambda g: (g * (2 / n) * diff,))


def bce_loss(logits: Tensor, labels: Any) -> Tensor:
    """Mean binary cross-entropy on logits, in log-sum-exp form."""
    y = np.asarray(labels.data if isinstance(labels, Tensor) else labels)
    if logits.shape != y.shape:
        raise ShapeError(f"bce_loss: logits{list(logits.shape)} vs labels{list(y.shape)}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("bce_loss: labels must be 0 or 1")
    y = y.astype(logits.dtype)
    l = logits.data
    n = l.size
    per = np.maximum(l, 0) - l * y + np.log1p(np.exp(-np.abs(l)))
    out = np.asarray(per.sum() / n, dtype=logits.dtype)
    return _node(out, (logits,), lambda g: (g * (_sigmoid(l) - y) / n,))


# ---------------------------------------------------------------------------
# graph traversal


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Tensor) -> dict[int, np.ndarray]:
    """Gradients of scalar ``root`` keyed by ``id`` of each leaf tensor."""
    if root.data.size != 1:
        raise ShapeError("backward: root must be a scalar")
    grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    leaves: dict[int, np.ndarray] = {}
    for node in reversed(_toposort(root)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if not node.parents:
            leaves[id(node)] = g
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    return leaves


# ---------------------------------------------------------------------------
# parameters and optimizer


class ParamSet(Mapping[str, Tensor]):
    """Named parameters, iterated in lexicographic path order."""

    def __init__(self, items: Mapping[str, Any] | None = None):
        self._items: dict[str, Tensor] = {}
        for path in sorted(items or {}):
            value = items[path]
            if not isinstance(value, Tensor):
                value = Tensor(np.array(value), requires_grad=True)
            elif not value.requires_grad or value.parents:
                value = Tensor(value.data, requires_grad=True)
            self._items[path] = value

    def __getitem__(self, path: str) -> Tensor:
        return self._items[path]

    def __iter__(self) -> Iterator[str]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __repr__(self) -> str:
        return f"ParamSet({len(self)} tensors, {self.size()} values)"

    def size(self) -> int:
        return sum(t.data.size for t in self._items.values())

    def scope(self, prefix: str) -> ParamSet:
        """View of the paths under ``prefix.`` with the prefix stripped.

        The returned set shares tensor objects, so gradients taken through
        it land on the parent's parameters.
        """
        p = prefix + "."
        view = ParamSet()
        view._items = {k[len(p):]: v for k, v in self._items.items() if k.startswith(p)}
        return view

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self._items.items()}

    def astype(self, dtype) -> ParamSet:
        return ParamSet({k: v.data.astype(dtype) for k, v in self._items.items()})

    def replace(self, updates: Mapping[str, np.ndarray]) -> ParamSet:
        merged = {k: v.data for k, v in self._items.items()}
        merged.update(updates)
        return ParamSet(merged)

    def merged(self, other: Mapping[str, Tensor], prefix: str = "") -> ParamSet:
        merged = {k: v.data for k, v in self._items.items()}
        merged.update({prefix + k: v.data for k, v in other.items()})
        return ParamSet(merged)


GradStore = dict  # path -> ndarray, shape-identical to the parameter


def grad(loss: Tensor, params: ParamSet) -> GradStore:
    """Gradient of scalar ``loss`` for every path of ``params``.

    Parameters the loss does not depend on receive zeros.
    """
    leaf_grads = backward(loss)
    out: GradStore = {}
    for path, t in params.items():
        g = leaf_grads.get(id(t))
        out[path] = np.zeros_like(t.data) if g is None else np.asarray(g, dtype=t.dtype).reshape(t.shape)
    return out


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: ParamSet) -> AdamState:
        return cls(
            m={k: np.zeros_like(t.data) for k, t in params.items()},
            v={k: np.zeros_like(t.data) for k, t in params.items()},
        )


def adam_step(
    params: ParamSet,
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[ParamSet, AdamState]:
    """Bias-corrected adaptive-moment update; returns new params and state."""
    missing = [p for p in params if p not in grads]
    if missing:
        raise KeyError(f"adam_step: missing gradient for {missing[0]!r}")
    step = state.step + 1
    new_m, new_v, new_p = {}, {}, {}
    for path, t in params.items():
        g = grads[path]
        if g.shape != t.shape:
            raise ShapeError(f"adam_step: gradient {list(g.shape)} vs parameter {list(t.shape)} at {path}")
        dt = t.dtype.type
        m = state.m.get(path, np.zeros_like(t.data))
        v = state.v.get(path, np.zeros_like(t.data))
        m = dt(beta1) * m + dt(1 - beta1) * g
        v = dt(beta2) * v + dt(1 - beta2) * (g * g)
        m_hat = m / dt(1 - beta1**step)
        v_hat = v / dt(1 - beta2**step)
        new_p[path] = t.data - dt(lr) * m_hat / (np.sqrt(v_hat) + dt(eps))
        new_m[path], new_v[path] = m, v
    return ParamSet(new_p), AdamState(new_m, new_v, step)


# ---------------------------------------------------------------------------
# finite-difference verification


def grad_check(
    loss_fn: Callable[[ParamSet], Tensor],
    params: ParamSet,
    eps: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs in double precision.  The relative error per coordinate uses the
    denominator ``max(|analytic|, |numeric|, 1e-8)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    base = params.astype(np.float64)
    first = loss_fn(base)
    second = loss_fn(base.astype(np.float64))
    if not np.array_equal(first.data, second.data):
        raise NondeterminismError("loss_fn returned different values at the same point")
    analytic = grad(first, base)
    arrays = {k: v.copy() for k, v in base.arrays().items()}

    def evaluate() -> float:
        return float(loss_fn(ParamSet(arrays)).data)

    worst = 0.0
    for path in base:
        arr = arrays[path]
        flat = arr.reshape(-1)
        a_flat = analytic[path].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = evaluate()
            flat[i] = orig - eps
            f_minus = evaluate()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2 * eps)
            a = a_flat[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
