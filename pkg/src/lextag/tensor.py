"""Dense reverse-mode tensors on numpy arrays.

Every operation records its parents and a backward closure on the output;
``backward()`` on a scalar loss replays the tape in reverse topological
order.  Training runs in 32-bit floats; ``set_default_dtype(np.float64)``
switches new tensors to 64-bit for finite-difference verification.
"""

from __future__ import annotations

import json
import math
import struct
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

_DTYPES = {"float32": np.float32, "float64": np.float64}
_default_dtype = np.float32
_grad_enabled = True


def set_default_dtype(dtype) -> None:
    global _default_dtype
    if isinstance(dtype, str):
        dtype = _DTYPES[dtype]
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype: {dtype!r}")
    _default_dtype = dtype


def get_default_dtype():
    return _default_dtype


@contextmanager
def using_dtype(dtype):
    prev = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(prev)


@contextmanager
def no_grad():
    """Disable tape recording (inference paths skip graph construction)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.asarray(values, dtype=_default_dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: tuple["Tensor", ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        return float(self.values)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other if isinstance(other, Tensor) else Tensor(other))

    def __sub__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        return add(self, scale(other, -1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, (int, float)):
            raise TypeError("tensor division only supports scalars")
        return scale(self, 1.0 / float(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self) -> None:
        """Populate grads of all requires_grad ancestors of this scalar.

        Leaf grads accumulate across calls; intermediate grads are scratch
        space cleared on entry, so each call contributes exactly one unit
        of loss gradient.
        """
        if self.values.size != 1:
            raise ValueError(f"backward requires a scalar, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        for node in topo:
            if node._parents:
                node.grad = None
        self.grad = np.ones_like(self.values)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def tensor(values, requires_grad: bool = False) -> Tensor:
    return Tensor(values, requires_grad=requires_grad)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.values)
    t.grad += g


def _record(values: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(values)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementwise and linear algebra -------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    values = a.values + b.values

    def bw(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _record(values, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    values = a.values * b.values

    def bw(g):
        _accum(a, _unbroadcast(g * b.values, a.shape))
        _accum(b, _unbroadcast(g * a.values, b.shape))

    return _record(values, (a, b), bw)


def scale(a: Tensor, s: float) -> Tensor:
    values = a.values * s

    def bw(g):
        _accum(a, g * s)

    return _record(values, (a,), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    values = np.matmul(a.values, b.values)

    def bw(g):
        _accum(a, _unbroadcast(np.matmul(g, np.swapaxes(b.values, -1, -2)), a.shape))
        _accum(b, _unbroadcast(np.matmul(np.swapaxes(a.values, -1, -2), g), b.shape))

    return _record(values, (a, b), bw)


def relu(a: Tensor) -> Tensor:
    values = np.maximum(a.values, 0)

    def bw(g):
        _accum(a, g * (a.values > 0))

    return _record(values, (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    x = a.values
    values = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    values = values.astype(x.dtype, copy=False)

    def bw(g):
        _accum(a, g * values * (1.0 - values))

    return _record(values, (a,), bw)


def _softmax(x: np.ndarray, axis: int) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_rows(a: Tensor) -> Tensor:
    """Softmax along the last axis; each row sums to 1."""
    values = _softmax(a.values, axis=-1)

    def bw(g):
        inner = (g * values).sum(axis=-1, keepdims=True)
        _accum(a, values * (g - inner))

    return _record(values, (a,), bw)


def sum_all(a: Tensor) -> Tensor:
    values = a.values.sum()

    def bw(g):
        _accum(a, np.broadcast_to(g, a.shape).copy())

    return _record(values, (a,), bw)


def mean_all(a: Tensor) -> Tensor:
    return scale(sum_all(a), 1.0 / a.size)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    values = a.values.reshape(shape)

    def bw(g):
        _accum(a, g.reshape(a.shape))

    return _record(values, (a,), bw)


def permute(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    values = np.transpose(a.values, axes)
    inverse = tuple(np.argsort(axes))

    def bw(g):
        _accum(a, np.transpose(g, inverse))

    return _record(values, (a,), bw)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    values = np.concatenate([t.values for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def bw(g):
        for t, piece in zip(tensors, np.split(g, offsets, axis=axis)):
            _accum(t, piece)

    return _record(values, tuple(tensors), bw)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    values = np.stack([t.values for t in tensors], axis=axis)

    def bw(g):
        for i, t in enumerate(tensors):
            _accum(t, np.take(g, i, axis=axis))

    return _record(values, tuple(tensors), bw)


def index_select(a: Tensor, axis: int, indices: Sequence[int]) -> Tensor:
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[axis]):
        raise IndexError(f"index out of range for axis {axis} of shape {a.shape}")
    values = np.take(a.values, idx, axis=axis)

    def bw(g):
        grad = np.zeros_like(a.values)
        np.add.at(grad, (slice(None),) * axis + (idx,), g)
        _accum(a, grad)

    return _record(values, (a,), bw)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    idx = np.asarray(ids, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError(f"id out of range for table of {table.shape[0]} rows")
    values = table.values[idx]

    def bw(g):
        grad = np.zeros_like(table.values)
        np.add.at(grad, idx, g)
        _accum(table, grad)

    return _record(values, (table,), bw)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return add(matmul(x, w), b)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean, unit variance, then scale."""
    mu = x.values.mean(axis=-1, keepdims=True)
    centered = x.values - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    values = gain.values * xhat + bias.values

    def bw(g):
        lead = tuple(range(g.ndim - 1))
        _accum(gain, (g * xhat).sum(axis=lead))
        _accum(bias, g.sum(axis=lead))
        dxhat = g * gain.values
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        _accum(x, inv_std * (dxhat - m1 - xhat * m2))

    return _record(values, (x, gain, bias), bw)


def dropout(x: Tensor, rate: float, rng: np.random.Generator, training: bool = True) -> Tensor:
    if not training or rate <= 0.0:
        return x
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep).astype(x.values.dtype) / keep
    values = x.values * mask

    def bw(g):
        _accum(x, g * mask)

    return _record(values, (x,), bw)


# -- losses --------------------------------------------------------------------


def cross_entropy(logits: Tensor, targets, ignore_index: int = -1) -> Tensor:
    """Mean negative log-likelihood over positions not carrying ignore_index.

    ``logits`` is (positions, classes); ``targets`` is an integer vector.
    All positions masked yields a constant zero loss.
    """
    tgt = np.asarray(targets, dtype=np.intp)
    if tgt.ndim != 1 or logits.ndim != 2 or tgt.shape[0] != logits.shape[0]:
        raise ValueError(f"cross_entropy shapes: {logits.shape} vs {tgt.shape}")
    mask = tgt != ignore_index
    count = int(mask.sum())
    if count and (tgt[mask].min() < 0 or tgt[mask].max() >= logits.shape[1]):
        raise IndexError("target label out of range")
    if count == 0:
        return _record(np.asarray(0.0, dtype=logits.values.dtype), (logits,), lambda g: None)

    z = logits.values - logits.values.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_probs = z - lse
    safe_tgt = np.where(mask, tgt, 0)
    picked = log_probs[np.arange(tgt.shape[0]), safe_tgt]
    values = -(picked * mask).sum() / count

    def bw(g):
        probs = np.exp(log_probs)
        probs[np.arange(tgt.shape[0]), safe_tgt] -= 1.0
        probs *= (mask / count)[:, None]
        _accum(logits, g * probs)

    return _record(np.asarray(values, dtype=logits.values.dtype), (logits,), bw)


def binary_cross_entropy(probs: Tensor, labels, eps: float = 1e-7) -> Tensor:
    """Mean Bernoulli negative log-likelihood; probs are clipped to (eps, 1-eps)."""
    y = np.asarray(labels, dtype=probs.values.dtype)
    if y.shape != probs.shape:
        raise ValueError(f"binary_cross_entropy shapes: {probs.shape} vs {y.shape}")
    n = max(probs.size, 1)
    p = np.clip(probs.values, eps, 1.0 - eps)
    values = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum() / n

    def bw(g):
        _accum(probs, g * (-(y / p) + (1.0 - y) / (1.0 - p)) / n)

    return _record(np.asarray(values, dtype=probs.values.dtype), (probs,), bw)


# -- attention ------------------------------------------------------------------


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """softmax(q·kᵀ/√d_k)·v with a row-wise softmax; leading axes broadcast."""
    d_k = q.shape[-1]
    if k.shape[-1] != d_k:
        raise ValueError(f"query dim {d_k} vs key dim {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ValueError(f"{k.shape[-2]} keys vs {v.shape[-2]} values")
    if k.shape[-2] < 1:
        raise ValueError("attention requires at least one key")
    axes = tuple(range(k.ndim - 2)) + (k.ndim - 1, k.ndim - 2)
    scores = scale(matmul(q, permute(k, axes)), 1.0 / math.sqrt(d_k))
    return matmul(softmax_rows(scores), v)


@dataclass
class AttentionParams:
    """Projection weights for one multi-head self-attention block.

    Query/key/value projections are bias-free (a key bias is invisible to
    the row-wise softmax anyway); the output projection is affine.
    """

    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    w_o: Tensor
    b_o: Tensor
    head_count: int = 1

    def __post_init__(self):
        hz = self.w_q.shape[0]
        if self.w_q.shape != (hz, hz):
            raise ValueError(f"w_q must be square, got {self.w_q.shape}")
        if hz % self.head_count != 0:
            raise ValueError(f"hz {hz} not divisible by head_count {self.head_count}")

    @property
    def hz(self) -> int:
        return self.w_q.shape[0]

    @property
    def d_k(self) -> int:
        return self.hz // self.head_count

    @classmethod
    def create(cls, hz: int, head_count: int, rng: np.random.Generator, init_scale: float = 0.02):
        def w():
            return Tensor(rng.normal(0.0, init_scale, size=(hz, hz)), requires_grad=True)

        b_o = Tensor(np.zeros(hz), requires_grad=True)
        return cls(w(), w(), w(), w(), b_o, head_count=head_count)

    def named(self, prefix: str):
        for field in ("w_q", "w_k", "w_v", "w_o", "b_o"):
            yield f"{prefix}.{field}", getattr(self, field)


def self_attention(x: Tensor, params: AttentionParams) -> Tensor:
    """Multi-head self-attention with output projection; x is (..., l, hz)."""
    if x.shape[-1] != params.hz:
        raise ValueError(f"input dim {x.shape[-1]} vs params hz {params.hz}")
    q = matmul(x, params.w_q)
    k = matmul(x, params.w_k)
    v = matmul(x, params.w_v)
    heads = params.head_count
    if heads == 1:
        ctx = scaled_dot_attention(q, k, v)
    else:
        lead = x.shape[:-2]
        l, hz = x.shape[-2], x.shape[-1]
        d_k = hz // heads
        swap = tuple(range(len(lead))) + (len(lead) + 1, len(lead), len(lead) + 2)

        def split(t):
            return permute(reshape(t, lead + (l, heads, d_k)), swap)

        ctx = scaled_dot_attention(split(q), split(k), split(v))
        ctx = reshape(permute(ctx, swap), lead + (l, hz))
    return affine(ctx, params.w_o, params.b_o)


def columnwise_attention(e_u: Tensor, r_sel: Tensor, weights: Optional[Tensor] = None) -> Tensor:
    """Per-token attention over candidate rows, fused forward and backward.

    Token j's query is e_u[j]; its keys are the m candidate representations
    at position j (r_sel is (m, l, hz)); values are the same rows, scaled by
    ``weights`` per candidate when given.  Projection-free, single head,
    scores scaled by 1/sqrt(hz).
    """
    if r_sel.ndim != 3 or e_u.ndim != 2 or r_sel.shape[1:] != e_u.shape:
        raise ValueError(f"columnwise shapes: e_u {e_u.shape}, r_sel {r_sel.shape}")
    if weights is not None and weights.shape != (r_sel.shape[0],):
        raise ValueError(f"weights shape {weights.shape} vs {r_sel.shape[0]} candidates")
    q = e_u.values
    r = r_sel.values
    inv = 1.0 / math.sqrt(e_u.shape[-1])
    alpha = _softmax(np.einsum("jh,njh->nj", q, r) * inv, axis=0)
    v = r if weights is None else r * weights.values[:, None, None]
    out = np.einsum("nj,njh->jh", alpha, v)
    parents = (e_u, r_sel) if weights is None else (e_u, r_sel, weights)

    def bw(g):
        d_alpha = np.einsum("jh,njh->nj", g, v)
        ds = alpha * (d_alpha - (alpha * d_alpha).sum(axis=0, keepdims=True))
        dv = alpha[:, :, None] * g[None, :, :]
        _accum(e_u, np.einsum("nj,njh->jh", ds, r) * inv)
        dr = np.einsum("nj,jh->njh", ds, q) * inv
        if weights is None:
            dr += dv
        else:
            dr += dv * weights.values[:, None, None]
            _accum(weights, np.einsum("njh,njh->n", dv, r))
        _accum(r_sel, dr)

    return _record(out, parents, bw)


# -- verification ----------------------------------------------------------------


def finite_diff_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-4,
    max_coords_per_tensor: int = 8,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` rebuilds the scalar loss from the live values of ``params``; up to
    ``max_coords_per_tensor`` coordinates are probed per tensor.  Run in
    64-bit mode for meaningful results.
    """
    rng = rng or np.random.default_rng(0)
    for p in params:
        p.grad = None
    f().backward()
    analytic = [np.zeros_like(p.values) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.values.reshape(-1)
        n = flat.size
        if n <= max_coords_per_tensor:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=max_coords_per_tensor, replace=False)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            up = f().item()
            flat[i] = orig - eps
            down = f().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            a = float(ana.reshape(-1)[i])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


# -- checkpoint container ---------------------------------------------------------

_MAGIC = b"LXTC"
_VERSION = 1


def save_container(path, header: dict, tensors: dict[str, np.ndarray]) -> None:
    """Write named float32 tensors plus a JSON header; bit-exact round trip."""
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", _VERSION, len(blob)))
        f.write(blob)
        f.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            data = np.ascontiguousarray(arr, dtype="<f4")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", data.ndim))
            if data.ndim:
                f.write(struct.pack(f"<{data.ndim}I", *data.shape))
            f.write(data.tobytes())


def load_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a tensor container")
        version, blob_len = struct.unpack("<II", f.read(8))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported container version {version}")
        header = json.loads(f.read(blob_len).decode("utf-8"))
        (count,) = struct.unpack("<I", f.read(4))
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", f.read(4))
            name = f.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", f.read(4))
            shape = struct.unpack(f"<{rank}I", f.read(4 * rank)) if rank else ()
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(4 * n), dtype="<f4").reshape(shape)
            tensors[name] = data.copy()
    return header, tensors
