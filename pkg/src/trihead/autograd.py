"""Reverse-mode automatic differentiation over dense numpy arrays.

Every operation returns a Tensor that records its inputs and a backward
rule; backward() replays the recorded graph once in reverse topological
order. Storage is flat row-major (numpy C order). float32 is the training
default; build tensors with dtype=np.float64 when gradient-checking, the
finite differences need the headroom.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import ConfigError, NonFiniteError

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Node:
    """One recorded operation: inputs and how to push gradient back to them."""

    __slots__ = ("op", "inputs", "backward_fn")

    def __init__(self, op, inputs, backward_fn):
        self.op = op
        self.inputs = inputs
        self.backward_fn = backward_fn


class Tensor:
    """Dense float array, optionally participating in the autodiff graph.

    grad, when present, always has the same shape as data. Tensors with
    requires_grad=False never accumulate gradient.
    """

    __slots__ = ("data", "requires_grad", "grad", "node")

    def __init__(self, data, requires_grad=False, dtype=None):
        if dtype is None:
            arr = np.asarray(data, dtype=np.float32)
        else:
            arr = np.asarray(data, dtype=dtype)
            if arr.dtype not in (np.float32, np.float64):
                raise ConfigError(f"Tensor dtype must be float32 or float64, got {arr.dtype}")
        self.data = np.ascontiguousarray(arr)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data.reshape(-1)[0])

    def detach(self):
        """Copy of the values, cut loose from the graph."""
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # arithmetic sugar; scalars are lifted to constants
    def __add__(self, other):
        return add(self, _lift(other, self.dtype))

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return add(self, scale(_lift(other, self.dtype), -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return sum_over(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean_over_axis(self, axis=axis, keepdims=keepdims)

    def reshape(self, shape):
        return reshape(self, shape)

    def transpose(self, axes=None):
        return transpose(self, axes)


def _lift(value, dtype):
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def _from_op(op, data, inputs, backward_fn):
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = any(t.requires_grad for t in inputs)
    out.grad = None
    out.node = Node(op, inputs, backward_fn) if out.requires_grad else None
    return out


def _unbroadcast(grad, shape):
    """Sum a gradient over the axes numpy broadcasting expanded."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data  # numpy raises on incompatible shapes

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _from_op("add", data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _from_op("mul", data, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    data = a.data * np.asarray(c, dtype=a.dtype)

    def backward(g):
        return (g * c,)

    return _from_op("scale", data, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs 2-D or higher operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul: inner dimensions disagree, {a.shape} x {b.shape}")
    data = a.data @ b.data

    def backward(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return _from_op("matmul", data, (a, b), backward)


def sum_over(a: Tensor, axis=None, keepdims=False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)
    data = np.asarray(data, dtype=a.dtype)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).astype(a.dtype, copy=True),)
        gx = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gx, a.shape).astype(a.dtype, copy=True),)

    return _from_op("sum", data, (a,), backward)


def mean_over_axis(a: Tensor, axis=None, keepdims=False) -> Tensor:
    n = a.size if axis is None else a.shape[axis]
    data = np.asarray(a.data.mean(axis=axis, keepdims=keepdims), dtype=a.dtype)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g / n, a.shape).astype(a.dtype, copy=True),)
        gx = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gx / n, a.shape).astype(a.dtype, copy=True),)

    return _from_op("mean", data, (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    data = a.data.reshape(shape)

    def backward(g):
        return (g.reshape(a.shape),)

    return _from_op("reshape", data, (a,), backward)


def transpose(a: Tensor, axes=None) -> Tensor:
    data = np.ascontiguousarray(a.data.transpose(axes))
    inverse = None if axes is None else tuple(np.argsort(axes))

    def backward(g):
        return (g.transpose(inverse),)

    return _from_op("transpose", data, (a,), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Stable softmax along one axis (max-subtraction before exp)."""
    if x.shape == () or x.shape[axis] < 1:
        raise ValueError(f"softmax: axis {axis} of shape {x.shape} is empty")
    if not np.isfinite(x.data).all():
        raise NonFiniteError("softmax: input contains NaN or Inf")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - inner),)

    return _from_op("softmax", y, (x,), backward)


def gelu(x: Tensor) -> Tensor:
    # exact erf form, as used by the BERT family
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    data = (x.data * cdf).astype(x.dtype, copy=False)

    def backward(g):
        pdf = np.exp(-0.5 * x.data * x.data) * _INV_SQRT2PI
        return (g * (cdf + x.data * pdf),)

    return _from_op("gelu", data, (x,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to mean 0, variance 1, then apply the affine."""
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    data = xhat * gamma.data + beta.data

    def backward(g):
        gbeta = _unbroadcast(g, beta.shape)
        ggamma = _unbroadcast(g * xhat, gamma.shape)
        gxhat = g * gamma.data
        m1 = gxhat.mean(axis=-1, keepdims=True)
        m2 = (gxhat * xhat).mean(axis=-1, keepdims=True)
        gx = inv_std * (gxhat - m1 - xhat * m2)
        return gx.astype(x.dtype, copy=False), ggamma, gbeta

    return _from_op("layer_norm", data, (x, gamma, beta), backward)


def dropout(x: Tensor, p: float, *, training: bool = False, rng=None) -> Tensor:
    """Zero entries with probability p, scaling survivors by 1/(1-p).

    Eval mode is exactly the identity (same object back). The rng must be a
    seeded numpy Generator so runs stay reproducible.
    """
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in training mode needs an rng")
    keep = (rng.random(x.shape) >= p).astype(x.dtype)
    keep *= np.asarray(1.0 / (1.0 - p), dtype=x.dtype)
    data = x.data * keep

    def backward(g):
        return (g * keep,)

    return _from_op("dropout", data, (x,), backward)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of a 2-D table; works for token embeddings and for
    selecting rows of any computed matrix (the backward pass scatters)."""
    ids = np.asarray(ids)
    if table.ndim != 2:
        raise ValueError(f"embedding_lookup: table must be 2-D, got {table.shape}")
    n = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        bad = ids[(ids < 0) | (ids >= n)].reshape(-1)[0]
        raise IndexError(f"embedding_lookup: id {bad} out of range [0, {n})")
    data = table.data[ids]

    def backward(g):
        buf = np.zeros_like(table.data)
        np.add.at(buf, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (buf,)

    return _from_op("embedding_lookup", data, (table,), backward)


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean over the batch of -log softmax(logits)[target].

    targets is an integer class index per row. Backward is the usual
    (softmax - one_hot) / batch.
    """
    if logits.ndim != 2:
        raise ValueError(f"cross_entropy: logits must be B x C, got {logits.shape}")
    targets = np.asarray(targets, dtype=np.int64)
    b, c = logits.shape
    if targets.shape != (b,):
        raise ValueError(f"cross_entropy: targets shape {targets.shape} does not match batch {b}")
    if targets.size and (targets.min() < 0 or targets.max() >= c):
        bad = targets[(targets < 0) | (targets >= c)][0]
        raise IndexError(f"cross_entropy: target {bad} out of range [0, {c})")
    m = logits.data.max(axis=1, keepdims=True)
    shifted = logits.data - m
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(b)
    losses = lse - shifted[rows, targets]
    data = np.asarray(losses.mean(), dtype=logits.dtype)

    def backward(g):
        p = np.exp(shifted)
        p /= p.sum(axis=1, keepdims=True)
        p[rows, targets] -= 1.0
        return ((g / b) * p.astype(logits.dtype, copy=False),)

    return _from_op("cross_entropy", data, (logits,), backward)


# ---------------------------------------------------------------------------
# backward pass


def backward(loss: Tensor) -> None:
    """Accumulate dLoss/dT into .grad for every requires_grad tensor
    reachable from loss. Calling again without clearing grads adds another
    full pass (gradients double).
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.node is None:
        if loss.requires_grad:
            seed = np.ones_like(loss.data)
            loss.grad = seed if loss.grad is None else loss.grad + seed
        return

    # reverse topological order: inputs before the op that consumes them
    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            topo.append(t)
            continue
        if t.node is None or id(t) in visited:
            continue
        visited.add(id(t))
        stack.append((t, True))
        for inp in t.node.inputs:
            stack.append((inp, False))

    # per-pass gradient buffers; leaves accumulate straight into .grad
    pass_grads = {id(loss): np.ones_like(loss.data)}
    for t in reversed(topo):
        g = pass_grads.pop(id(t), None)
        if g is None:
            continue
        if t.requires_grad:
            t.grad = g.copy() if t.grad is None else t.grad + g
        for inp, gi in zip(t.node.inputs, t.node.backward_fn(g)):
            if gi is None or not inp.requires_grad:
                continue
            if inp.node is None:
                inp.grad = gi if inp.grad is None else inp.grad + gi
            else:
                key = id(inp)
                if key in pass_grads:
                    pass_grads[key] = pass_grads[key] + gi
                else:
                    pass_grads[key] = gi


# ---------------------------------------------------------------------------
# verification


@dataclass
class GradCheckReport:
    max_rel_error: float
    tol: float
    passed: bool
    worst_index: tuple

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return f"grad check {status}: max relative error {self.max_rel_error:.3e} (tol {self.tol:.1e})"


def grad_check(f, x: Tensor, eps: float = 1e-4, tol: float = 1e-3,
               floor: float = 1e-6) -> GradCheckReport:
    """Compare backward() against central finite differences, coordinate by
    coordinate: (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).

    f must be scalar-valued and deterministic (run dropout in eval mode);
    this is checked by evaluating twice. Relative error per coordinate is
    |a - n| / max(|a| + |n|, floor); the floor keeps pure-roundoff noise on
    near-zero gradients from registering as failure.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    y1 = f(Tensor(x.data.copy(), dtype=x.dtype))
    y2 = f(Tensor(x.data.copy(), dtype=x.dtype))
    if y1.size != 1:
        raise ValueError(f"grad_check needs a scalar-valued f, got shape {y1.shape}")
    if y1.item() != y2.item():
        raise ValueError("grad_check: f is not deterministic (is dropout still enabled?)")

    probe = Tensor(x.data.copy(), requires_grad=True, dtype=x.dtype)
    backward(f(probe))
    analytic = probe.grad if probe.grad is not None else np.zeros_like(probe.data)

    numeric = np.zeros_like(x.data)
    flat = numeric.reshape(-1)
    base = x.data.reshape(-1)
    for i in range(base.size):
        bumped = base.copy()
        bumped[i] = base[i] + eps
        f_plus = f(Tensor(bumped.reshape(x.shape), dtype=x.dtype)).item()
        bumped[i] = base[i] - eps
        f_minus = f(Tensor(bumped.reshape(x.shape), dtype=x.dtype)).item()
        flat[i] = (f_plus - f_minus) / (2.0 * eps)

    diff = np.abs(analytic - numeric)
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    rel = diff / denom
    worst = int(np.argmax(rel)) if rel.size else 0
    max_rel = float(rel.reshape(-1)[worst]) if rel.size else 0.0
    return GradCheckReport(
        max_rel_error=max_rel,
        tol=tol,
        passed=max_rel <= tol,
        worst_index=tuple(np.unravel_index(worst, x.shape)) if x.shape else (),
    )
