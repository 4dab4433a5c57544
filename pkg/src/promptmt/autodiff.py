"""Dense-tensor compute core with reverse-mode automatic differentiation.

Tensors wrap numpy arrays and record, per operation, their parent tensors
and a backward rule. ``backward(loss)`` topologically sorts the recorded
graph and accumulates gradients into every tensor on a path to a
``requires_grad`` leaf, including intermediate nodes (generated mapping
parameters are ordinary graph nodes, so gradients flow through them to
their producers).

Core arithmetic is float32. A float64 mode, entered via ``precision()``,
exists for finite-difference gradient checking; see ``grad_check``.

Broadcasting is restricted to missing leading (batch) dimensions: shapes
are aligned from the right and every aligned dimension must match
exactly. Anything else requires an explicit reshape.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (DegenerateBatchError, GraphError, NumericError,
                     ShapeError, VocabularyError)

_DEFAULT_DTYPE = np.float32
_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the context (inference fast path)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


@contextlib.contextmanager
def precision(dtype):
    """Temporarily switch the dtype used for newly created tensors.

    ``precision(np.float64)`` is the gradient-check mode: everything built
    inside the context (parameters included) carries float64 data, which
    makes central finite differences reliable at h ~ 1e-3..1e-4.
    """
    global _DEFAULT_DTYPE
    prev = _DEFAULT_DTYPE
    _DEFAULT_DTYPE = np.dtype(dtype).type
    try:
        yield
    finally:
        _DEFAULT_DTYPE = prev


def default_dtype():
    return _DEFAULT_DTYPE


class Tensor:
    """A dense float array plus its position in the autodiff graph.

    ``_parents`` and ``_backward`` are set exactly once, by the operation
    that produced the tensor; leaves have neither.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward",
                 "_backward_ran")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype or _DEFAULT_DTYPE)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._backward_ran = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """A leaf tensor sharing this tensor's data, cut from the graph."""
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def accumulate_grad(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar over the module-level ops.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_node(data: np.ndarray, parents: Sequence[Tensor],
              backward: Optional[Callable[[np.ndarray], None]]) -> Tensor:
    """Record one operation: output data, its parents, its backward rule.

    The backward rule is attached only when some parent requires grad, so
    inference-time graphs carry no backprop machinery.
    """
    out = Tensor(data, dtype=data.dtype)
    out.requires_grad = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _check_aligned(sa, sb, opname):
    # Right-aligned dims must match exactly; only missing leading dims broadcast.
    for da, db in zip(reversed(sa), reversed(sb)):
        if da != db:
            raise ShapeError(f"{opname}: shapes {tuple(sa)} and {tuple(sb)} "
                             "differ in an aligned dimension")


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient over the leading axes added by broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    return g


# ---------------------------------------------------------------------------
# elementwise / structural ops
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_aligned(a.shape, b.shape, "add")
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape))

    return make_node(out_data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_aligned(a.shape, b.shape, "mul")
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.shape))

    return make_node(out_data, (a, b), backward)


def scale(x: Tensor, s: float) -> Tensor:
    x = _as_tensor(x)
    s = float(s)
    out_data = x.data * x.data.dtype.type(s)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * x.data.dtype.type(s))

    return make_node(out_data, (x,), backward)


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    """Permute axes; default swaps the last two dimensions."""
    if x.ndim < 2 and axes is None:
        raise ShapeError(f"transpose: need at least 2 dims, got shape {x.shape}")
    if axes is None:
        axes = list(range(x.ndim - 2)) + [x.ndim - 1, x.ndim - 2]
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out_data = np.transpose(x.data, axes)

    def backward(g):
        x.accumulate_grad(np.transpose(g, inverse))

    return make_node(out_data, (x,), backward)


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    old = x.shape
    out_data = x.data.reshape(shape)

    def backward(g):
        x.accumulate_grad(g.reshape(old))

    return make_node(out_data, (x,), backward)


def concat(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    xs = [_as_tensor(x) for x in xs]
    if not xs:
        raise ShapeError("concat: empty input list")
    out_data = np.concatenate([x.data for x in xs], axis=axis)
    sizes = [x.shape[axis] for x in xs]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for x, lo, hi in zip(xs, offsets[:-1], offsets[1:]):
            if x.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                x.accumulate_grad(g[tuple(idx)])

    return make_node(out_data, tuple(xs), backward)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """A contiguous slice along one axis; backward scatters into zeros."""
    if start < 0 or start + length > x.shape[axis]:
        raise ShapeError(f"narrow: [{start}:{start + length}] out of range for "
                         f"axis {axis} of shape {x.shape}")
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out_data = x.data[idx]

    def backward(g):
        full = np.zeros_like(x.data)
        full[idx] = g
        x.accumulate_grad(full)

    return make_node(out_data, (x,), backward)


def sum_(x: Tensor, axis: Optional[int] = None) -> Tensor:
    out_data = x.data.sum(axis=axis)

    def backward(g):
        if axis is None:
            x.accumulate_grad(np.full_like(x.data, 1.0) * g)
        else:
            x.accumulate_grad(np.broadcast_to(np.expand_dims(g, axis),
                                              x.shape).copy())

    return make_node(np.asarray(out_data), (x,), backward)


def mean(x: Tensor, axis: Optional[int] = None) -> Tensor:
    n = x.size if axis is None else x.shape[axis]
    return scale(sum_(x, axis=axis), 1.0 / n)


def relu(x: Tensor) -> Tensor:
    out_data = np.maximum(x.data, 0)

    def backward(g):
        x.accumulate_grad(g * (x.data > 0))

    return make_node(out_data, (x,), backward)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands must be >=2-D, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions disagree, {a.shape} @ {b.shape}")
    _check_aligned(a.shape[:-2], b.shape[:-2], "matmul (batch dims)")
    out_data = np.matmul(a.data, b.data)

    def backward(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a.accumulate_grad(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b.accumulate_grad(_unbroadcast(gb, b.shape))

    return make_node(out_data, (a, b), backward)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b, where w and b may themselves be outputs of other ops.

    All three arguments are ordinary graph nodes, so gradients reach the
    producers of generated parameters exactly like those of leaf weights.
    """
    return add(matmul(x, w), b)


# ---------------------------------------------------------------------------
# neural-net primitives
# ---------------------------------------------------------------------------

def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if np.isnan(x.data).any():
        raise NumericError("softmax: NaN in input")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        x.accumulate_grad(out_data * (g - dot))

    return make_node(out_data, (x,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last dimension (population variance), then affine."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: gain/bias shape must be ({d},), got "
                         f"{gain.shape} / {bias.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + x.data.dtype.type(eps))
    xhat = (x.data - mu) * inv
    out_data = xhat * gain.data + bias.data

    def backward(g):
        if gain.requires_grad:
            gain.accumulate_grad((g * xhat).reshape(-1, d).sum(axis=0))
        if bias.requires_grad:
            bias.accumulate_grad(g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            gx = g * gain.data
            m1 = gx.mean(axis=-1, keepdims=True)
            m2 = (gx * xhat).mean(axis=-1, keepdims=True)
            x.accumulate_grad(inv * (gx - m1 - xhat * m2))

    return make_node(out_data, (x, gain, bias), backward)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of ``table``; backward scatter-adds into the gathered rows."""
    ids = np.asarray(ids, dtype=np.int64)
    v = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= v):
        bad = int(ids[(ids < 0) | (ids >= v)][0])
        raise VocabularyError(f"embedding_lookup: id {bad} outside table of size {v}")
    out_data = table.data[ids]

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        table.accumulate_grad(full)

    return make_node(out_data, (table,), backward)


def cross_entropy_label_smoothed(logits: Tensor, targets, eps_ls: float,
                                 pad_id: int, reduction: str = "mean") -> Tensor:
    """Label-smoothed cross entropy over ``[n, V]`` logits.

    The smoothed target distribution is (1-eps)*onehot + eps/V uniform.
    Positions whose target equals ``pad_id`` contribute nothing, to the
    loss or to the normalizer. ``reduction`` is "mean" over non-pad
    positions or "sum"; use "sum" to average across a multi-example batch
    with a shared normalizer.
    """
    if not 0.0 <= eps_ls < 1.0:
        raise ValueError(f"eps_ls must be in [0, 1), got {eps_ls}")
    targets = np.asarray(targets, dtype=np.int64)
    n, v = logits.shape
    if targets.shape != (n,):
        raise ShapeError(f"cross_entropy: targets shape {targets.shape} vs logits {logits.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= v):
        raise VocabularyError("cross_entropy: target id outside vocabulary")
    nonpad = targets != pad_id
    count = int(nonpad.sum())
    if count == 0:
        raise DegenerateBatchError("cross_entropy: every position is padding")

    x = logits.data
    shifted = x - x.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - lse
    dt = x.dtype.type
    picked = logp[np.arange(n), targets]
    per_pos = -(dt(1.0 - eps_ls) * picked + dt(eps_ls) * logp.mean(axis=-1))
    total = (per_pos * nonpad).sum()
    denom = count if reduction == "mean" else 1
    out_data = np.asarray(total / dt(denom), dtype=x.dtype)

    def backward(g):
        q = np.full_like(x, dt(eps_ls) / dt(v))
        q[np.arange(n), targets] += dt(1.0 - eps_ls)
        p = np.exp(logp)
        dlogits = (p - q) * nonpad[:, None] / dt(denom)
        logits.accumulate_grad(dlogits * g)

    return make_node(out_data, (logits,), backward)


def dropout(x: Tensor, p: float, rng: np.random.Generator,
            training: bool) -> Tensor:
    """Inverted-scaling dropout: at train time, zero with prob p and divide
    survivors by (1-p); identity in eval mode or at p == 0."""
    if not training or p <= 0.0:
        return x
    keep = 1.0 - p
    mask = (rng.random(x.shape) < keep).astype(x.data.dtype) / x.data.dtype.type(keep)
    return mul(x, Tensor(mask, dtype=x.data.dtype))


# ---------------------------------------------------------------------------
# backward pass and gradient checking
# ---------------------------------------------------------------------------

def backward(loss: Tensor):
    """Accumulate d(loss)/d(node) into ``.grad`` of every reachable node.

    ``loss`` must be scalar. A second call on the same loss tensor is an
    error; rebuild the forward pass (after zeroing grads) to run again.
    """
    if loss.size != 1:
        raise GraphError(f"backward: loss must be scalar, got shape {loss.shape}")
    if loss._backward_ran:
        raise GraphError("backward: already called on this loss; rebuild the "
                         "graph (and zero grads) before calling again")
    loss._backward_ran = True

    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))

    loss.accumulate_grad(np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)


def zero_grad(tensors):
    for t in tensors:
        t.zero_grad()


@dataclass
class GradCheckReport:
    name: str
    max_rel_err: float
    n_checked: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return (f"[{status}] {self.name}: max rel err {self.max_rel_err:.3e} "
                f"over {self.n_checked} entries (tol {self.tol:g})")


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1e-6)


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-3,
               tol: float = 1e-3, max_entries: Optional[int] = None,
               seed: int = 0, name: str = "grad_check") -> GradCheckReport:
    """Compare analytic gradients of scalar-valued ``f`` at ``x`` against
    central finite differences, in float64.

    Any other tensors ``f`` closes over should also be float64 (build them
    under ``precision(np.float64)``). With ``max_entries`` set, a seeded
    sample of coordinates is checked instead of all of them.
    """
    with precision(np.float64):
        x64 = Tensor(np.asarray(x.data, dtype=np.float64), requires_grad=True)
        loss = f(x64)
        backward(loss)
        analytic = x64.grad.copy() if x64.grad is not None else np.zeros_like(x64.data)

        flat = x64.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            rng = np.random.Generator(np.random.PCG64(seed))
            indices = rng.choice(flat.size, size=max_entries, replace=False)

        max_err = 0.0
        for i in indices:
            orig = flat[i]
            flat[i] = orig + h
            f_plus = f(x64).item()
            flat[i] = orig - h
            f_minus = f(x64).item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2 * h)
            max_err = max(max_err, _rel_err(float(analytic.reshape(-1)[i]), numeric))

    return GradCheckReport(name=name, max_rel_err=max_err,
                           n_checked=len(indices), tol=tol)
