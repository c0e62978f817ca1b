"""Minimal reverse-mode autodiff over float64 numpy arrays.

Just enough machinery for the transcription model: every op records a
backward closure onto the produced tensor, and backward() replays the
graph in reverse topological order. Tensors whose inputs are all
non-trainable record nothing, so frozen-base training tapes only the
adapter paths. Wrap evaluation code in no_grad() to skip taping
entirely; the numeric results are identical either way.
"""

import threading
from contextlib import contextmanager

import numpy as np

from .errors import NoRecordedForward

# grad mode is per-thread so parallel trials cannot disturb each other
_STATE = threading.local()


@contextmanager
def no_grad():
    prev = grad_enabled()
    _STATE.enabled = False
    try:
        yield
    finally:
        _STATE.enabled = prev


def grad_enabled() -> bool:
    return getattr(_STATE, "enabled", True)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape}, grad={self.requires_grad})"

    def backward(self):
        """Accumulate gradients of this scalar into every trainable leaf."""
        if self.data.shape != ():
            raise ValueError("backward() needs a scalar loss")
        if self._backward is None and not self._parents:
            raise NoRecordedForward("no recorded forward pass behind this value")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones((), dtype=np.float64)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
            if node._parents:
                # interior values do not keep gradients alive
                node.grad = None


def _accumulate(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum `g` down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward = backward
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(a.data + b.data, (a, b), backward)


def add_const(a: Tensor, c: np.ndarray) -> Tensor:
    """Add a constant (e.g. positional table or attention mask)."""

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))

    return _make(a.data + c, (a,), backward)


def scale(a: Tensor, s: float) -> Tensor:
    def backward(g):
        _accumulate(a, g * s)

    return _make(a.data * s, (a,), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(a.data * b.data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            ga = g @ b.data.swapaxes(-1, -2)
            _accumulate(a, _unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = a.data.swapaxes(-1, -2) @ g
            _accumulate(b, _unbroadcast(gb, b.data.shape))

    return _make(a.data @ b.data, (a, b), backward)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.data.shape

    def backward(g):
        _accumulate(a, g.reshape(old))

    return _make(a.data.reshape(shape), (a,), backward)


def swapaxes(a: Tensor, i: int, j: int) -> Tensor:
    def backward(g):
        _accumulate(a, g.swapaxes(i, j))

    return _make(a.data.swapaxes(i, j), (a,), backward)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids)

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        _accumulate(table, gt)

    return _make(table.data[ids], (table,), backward)


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(a: Tensor) -> Tensor:
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(inner)
    y = 0.5 * x * (1.0 + t)

    def backward(g):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * x ** 2)
        dx = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * d_inner
        _accumulate(a, g * dx)

    return _make(y, (a,), backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        _accumulate(a, y * (g - dot))

    return _make(y, (a,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    y = gamma.data * xhat + beta.data

    def backward(g):
        if gamma.requires_grad:
            _accumulate(gamma, _unbroadcast(g * xhat, gamma.data.shape))
        if beta.requires_grad:
            _accumulate(beta, _unbroadcast(g, beta.data.shape))
        if x.requires_grad:
            dxhat = g * gamma.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            _accumulate(x, inv * (dxhat - m1 - xhat * m2))

    return _make(y, (x, gamma, beta), backward)


def cross_entropy_logits(logits: Tensor, targets: np.ndarray,
                         mask: np.ndarray) -> Tensor:
    """Mean negative log-likelihood over positions where mask is true.

    logits: (N, V); targets: (N,) int; mask: (N,) bool.
    """
    targets = np.asarray(targets)
    mask = np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    if count == 0:
        from .errors import AllPositionsMasked
        raise AllPositionsMasked("no unmasked target positions")
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1))
    ll = lse - z[np.arange(len(targets)), targets]
    loss = (ll * mask).sum() / count

    def backward(g):
        p = np.exp(z - lse[:, None])
        p[np.arange(len(targets)), targets] -= 1.0
        _accumulate(logits, p * (g * mask / count)[:, None])

    return _make(np.float64(loss), (logits,), backward)
