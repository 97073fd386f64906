"""Dense tensor engine with reverse-mode differentiation.

Every primitive records its inputs and a backward closure on the output
tensor; the resulting graph is the tape. ``backward`` replays the recorded
operations in exact reverse topological order, accumulates gradients
additively into every ``requires_grad`` leaf, then releases the tape.

Float64 is the reference precision; call ``set_default_dtype(np.float32)``
for the opt-in speed mode. All normalizers (softmax, log-softmax,
cross-entropy) use shifted log-sum-exp.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ShapeError

_DEFAULT_DTYPE = np.float64

_FLOAT_DTYPES = (np.float32, np.float64)


def set_default_dtype(dtype) -> None:
    """Set the dtype used for newly created float tensors (f32 or f64)."""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype).type
    if dtype not in _FLOAT_DTYPES:
        raise ValueError(f"unsupported dtype {dtype}; use float32 or float64")
    _DEFAULT_DTYPE = dtype


def default_dtype():
    return _DEFAULT_DTYPE


class Tensor:
    """An n-dimensional float array plus its place in the tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype.type not in _FLOAT_DTYPES:
            arr = arr.astype(_DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

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

    def item(self) -> float:
        return float(self.data)

    def backward(self):
        backward(self)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # convenience operators; the named primitives below do the work
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(_as_tensor(other), -1.0))

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _from_op(data: np.ndarray, parents, backward_fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def backward(loss: Tensor) -> None:
    """Run the tape in reverse from a scalar loss, filling ``grad`` fields.

    Gradients accumulate additively when a tensor feeds several consumers.
    The tape is released afterwards, so a graph can be walked only once.
    """
    if loss.size != 1:
        raise ShapeError("backward requires a scalar loss", loss.shape)
    tape = []
    visited = set()
    stack = [(loss, False)]
    while stack:  # iterative DFS; graphs can exceed the recursion limit
        node, expanded = stack.pop()
        if expanded:
            tape.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
        node._parents = ()
        node._backward = None


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient down to ``shape`` after numpy broadcasting."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# primitives


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError("add: incompatible shapes", a.shape, b.shape) from None

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _from_op(data, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError("mul: incompatible shapes", a.shape, b.shape) from None

    def bwd(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _from_op(data, (a, b), bwd)


def matmul(a, b) -> Tensor:
    """Matrix product with numpy batch-dimension broadcasting (ndim >= 2)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul requires ndim >= 2", a.shape, b.shape)
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul: inner dimensions differ", a.shape, b.shape)
    try:
        data = a.data @ b.data
    except ValueError:
        raise ShapeError("matmul: batch dims incompatible", a.shape, b.shape) from None

    def bwd(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        _accumulate(a, _unbroadcast(ga, a.shape))
        _accumulate(b, _unbroadcast(gb, b.shape))

    return _from_op(data, (a, b), bwd)


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    # stable for both signs
    data = np.where(x.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(x.data))),
                    np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data))))
    data = data.astype(x.dtype, copy=False)

    def bwd(g):
        _accumulate(x, g * data * (1.0 - data))

    return _from_op(data, (x,), bwd)


def tanh(x) -> Tensor:
    x = _as_tensor(x)
    data = np.tanh(x.data)

    def bwd(g):
        _accumulate(x, g * (1.0 - data * data))

    return _from_op(data, (x,), bwd)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x) -> Tensor:
    """Gaussian error linear unit (tanh approximation)."""
    x = _as_tensor(x)
    v = x.data
    inner = _GELU_C * (v + 0.044715 * v**3)
    t = np.tanh(inner)
    data = 0.5 * v * (1.0 + t)

    def bwd(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * v * v)
        dx = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner
        _accumulate(x, g * dx)

    return _from_op(data.astype(x.dtype, copy=False), (x,), bwd)


def softmax(x, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        _accumulate(x, (g - dot) * data)

    return _from_op(data, (x,), bwd)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    data = np_log_softmax(x.data, axis=axis)

    def bwd(g):
        _accumulate(x, g - np.exp(data) * g.sum(axis=axis, keepdims=True))

    return _from_op(data, (x,), bwd)


def np_log_softmax(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """Stable log-softmax on a plain array (no tape entry)."""
    m = a.max(axis=axis, keepdims=True)
    shifted = a - m
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError("layer_norm: gain/bias must match last axis", x.shape, gain.shape)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = ((x.data - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = xhat * gain.data + bias.data

    def bwd(g):
        lead = tuple(range(g.ndim - 1))
        _accumulate(gain, (g * xhat).sum(axis=lead))
        _accumulate(bias, g.sum(axis=lead))
        dxhat = g * gain.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        _accumulate(x, (dxhat - m1 - xhat * m2) * inv)

    return _from_op(data, (x, gain, bias), bwd)


def embedding_lookup(table, ids: np.ndarray) -> Tensor:
    """Gather rows of ``table`` (n_rows x d) by an integer id array."""
    table = _as_tensor(table)
    ids = np.asarray(ids)
    if ids.min(initial=0) < 0 or ids.max(initial=0) >= table.shape[0]:
        raise ShapeError(f"embedding ids out of range [0, {table.shape[0]})")
    data = table.data[ids]

    def bwd(g):
        if not table.requires_grad:
            return
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, ids, g)

    return _from_op(data, (table,), bwd)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of no tensors")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]

    def bwd(g):
        start = 0
        for t, s in zip(tensors, sizes):
            idx = [np.s_[:]] * g.ndim
            idx[axis] = np.s_[start:start + s]
            _accumulate(t, g[tuple(idx)])
            start += s

    return _from_op(data, tuple(tensors), bwd)


def slice_axis(x, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice along one axis."""
    x = _as_tensor(x)
    idx = [np.s_[:]] * x.ndim
    idx[axis] = np.s_[start:stop]
    idx = tuple(idx)
    data = x.data[idx]

    def bwd(g):
        full = np.zeros_like(x.data)
        full[idx] = g
        _accumulate(x, full)

    return _from_op(data, (x,), bwd)


def reshape(x, shape) -> Tensor:
    x = _as_tensor(x)
    data = x.data.reshape(shape)

    def bwd(g):
        _accumulate(x, g.reshape(x.shape))

    return _from_op(data, (x,), bwd)


def transpose(x, axes=None) -> Tensor:
    x = _as_tensor(x)
    data = np.transpose(x.data, axes)
    inv = None if axes is None else np.argsort(axes)

    def bwd(g):
        _accumulate(x, np.transpose(g, inv))

    return _from_op(data, (x,), bwd)


def dropout(x, p: float, rng: np.random.Generator, train: bool) -> Tensor:
    """Inverted dropout: scales by 1/(1-p) at train time, identity in eval."""
    x = _as_tensor(x)
    if not train or p <= 0.0:
        return x
    if p >= 1.0:
        raise ValueError(f"dropout probability must be < 1, got {p}")
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    data = x.data * mask

    def bwd(g):
        _accumulate(x, g * mask)

    return _from_op(data, (x,), bwd)


def sum_all(x) -> Tensor:
    x = _as_tensor(x)
    data = np.asarray(x.data.sum())

    def bwd(g):
        _accumulate(x, np.broadcast_to(g, x.shape).copy())

    return _from_op(data, (x,), bwd)


def cross_entropy(logits, targets: np.ndarray, ignore_id: int = -1) -> Tensor:
    """Mean negative log-likelihood over positions whose target != ignore_id.

    ``logits`` has class scores on the last axis; ``targets`` holds integer
    class ids with the same leading shape.
    """
    logits = _as_tensor(logits)
    targets = np.asarray(targets)
    if targets.shape != logits.shape[:-1]:
        raise ShapeError("cross_entropy: targets must match logits' leading shape",
                         logits.shape, targets.shape)
    v = logits.shape[-1]
    flat = logits.data.reshape(-1, v)
    t = targets.reshape(-1)
    valid = t != ignore_id
    n = int(valid.sum())
    if n == 0:
        raise ValueError("cross_entropy: no valid targets")
    safe_t = np.where(valid, t, 0)
    m = flat.max(axis=-1, keepdims=True)
    shifted = flat - m
    lse = np.log(np.exp(shifted).sum(axis=-1)) + m[:, 0]
    nll = lse - flat[np.arange(flat.shape[0]), safe_t]
    data = np.asarray((nll * valid).sum() / n)

    def bwd(g):
        probs = np.exp(shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True)))
        probs[np.arange(flat.shape[0]), safe_t] -= 1.0
        probs[~valid] = 0.0
        gl = (probs * (g / n)).reshape(logits.shape).astype(logits.dtype, copy=False)
        _accumulate(logits, gl)

    return _from_op(data, (logits,), bwd)


# ---------------------------------------------------------------------------
# verification harness


def grad_check(f, theta: np.ndarray, eps: float = 1e-5) -> float:
    """Compare reverse-mode gradients of ``f`` against central differences.

    ``f`` maps a Tensor shaped like ``theta`` to a scalar Tensor. Returns the
    maximum relative error |a-b| / max(1e-8, |a|+|b|) over all coordinates.
    """
    theta = np.asarray(theta, dtype=np.float64)
    leaf = Tensor(theta.copy(), requires_grad=True)
    loss = f(leaf)
    backward(loss)
    analytic = (leaf.grad if leaf.grad is not None else np.zeros_like(theta)).ravel()

    work = theta.copy()
    flat = work.ravel()
    numeric = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = float(f(Tensor(work.copy())).data)
        flat[i] = orig - eps
        lo = float(f(Tensor(work.copy())).data)
        flat[i] = orig
        numeric[i] = (hi - lo) / (2.0 * eps)

    denom = np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))
