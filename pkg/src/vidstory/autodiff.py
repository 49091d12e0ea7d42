"""Minimal reverse-mode tape over float64 numpy arrays.

Just enough autodiff for this package: the recurrent encoders, the two
ranking losses and the policy log-probabilities are all compositions of
the dozen primitives below.  Nodes whose inputs carry no gradient are
created as constants, so inference-time forward passes leave no graph
behind.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

Array = np.ndarray


class Tensor:
    """A value on the tape; leaves with requires_grad=True collect grads."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"Tensor({self.data!r}, requires_grad={self.requires_grad})"

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(wrap(other), -1.0))

    def __rsub__(self, other):
        return add(wrap(other), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(wrap(other), self)

    def __matmul__(self, other):
        return matvec(self, other)


def wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def param(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def wrap_params(arrays: dict[str, Array]) -> dict[str, Tensor]:
    """Wrap a named parameter dict as gradient-carrying leaves."""
    return {k: param(v) for k, v in arrays.items()}


def _node(data, parents: tuple[Tensor, ...], backward) -> Tensor:
    if not any(p.requires_grad for p in parents):
        return Tensor(data)
    out = Tensor(data, requires_grad=True)
    out._parents = parents
    out._backward = backward
    return out


def _accum(t: Tensor, g: Array) -> None:
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


# -- primitives ---------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = wrap(a), wrap(b)
    out_data = a.data + b.data

    def backward(out):
        _accum(a, _unbroadcast(out.grad, a.data.shape))
        _accum(b, _unbroadcast(out.grad, b.data.shape))

    return _node(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = wrap(a), wrap(b)
    out_data = a.data * b.data

    def backward(out):
        _accum(a, _unbroadcast(out.grad * b.data, a.data.shape))
        _accum(b, _unbroadcast(out.grad * a.data, b.data.shape))

    return _node(out_data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = wrap(a), wrap(b)
    out_data = a.data / b.data

    def backward(out):
        _accum(a, _unbroadcast(out.grad / b.data, a.data.shape))
        _accum(b, _unbroadcast(-out.grad * a.data / (b.data * b.data), b.data.shape))

    return _node(out_data, (a, b), backward)


def matvec(w, x) -> Tensor:
    w, x = wrap(w), wrap(x)
    if w.data.ndim != 2 or x.data.ndim != 1 or w.data.shape[1] != x.data.shape[0]:
        raise ShapeError(f"matvec: {w.data.shape} @ {x.data.shape} disagree")
    out_data = w.data @ x.data

    def backward(out):
        _accum(w, np.outer(out.grad, x.data))
        _accum(x, w.data.T @ out.grad)

    return _node(out_data, (w, x), backward)


def dot(a, b) -> Tensor:
    a, b = wrap(a), wrap(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"dot: shapes {a.data.shape} and {b.data.shape} disagree")
    out_data = np.dot(a.data, b.data)

    def backward(out):
        _accum(a, out.grad * b.data)
        _accum(b, out.grad * a.data)

    return _node(out_data, (a, b), backward)


def vsum(a) -> Tensor:
    a = wrap(a)
    out_data = a.data.sum()

    def backward(out):
        _accum(a, np.full_like(a.data, out.grad))

    return _node(out_data, (a,), backward)


def sigmoid(a) -> Tensor:
    a = wrap(a)
    from scipy.special import expit

    s = expit(a.data)

    def backward(out):
        _accum(a, out.grad * s * (1.0 - s))

    return _node(s, (a,), backward)


def tanh(a) -> Tensor:
    a = wrap(a)
    t = np.tanh(a.data)

    def backward(out):
        _accum(a, out.grad * (1.0 - t * t))

    return _node(t, (a,), backward)


def relu(a) -> Tensor:
    """max(0, a) with zero subgradient at the kink."""
    a = wrap(a)
    mask = a.data > 0

    def backward(out):
        _accum(a, out.grad * mask)

    return _node(np.where(mask, a.data, 0.0), (a,), backward)


def clamp(a, lo: float, hi: float) -> Tensor:
    a = wrap(a)
    mask = (a.data > lo) & (a.data < hi)

    def backward(out):
        _accum(a, out.grad * mask)

    return _node(np.clip(a.data, lo, hi), (a,), backward)


def log(a) -> Tensor:
    a = wrap(a)
    out_data = np.log(a.data)

    def backward(out):
        _accum(a, out.grad / a.data)

    return _node(out_data, (a,), backward)


def sqrt(a) -> Tensor:
    a = wrap(a)
    root = np.sqrt(a.data)

    def backward(out):
        _accum(a, out.grad / (2.0 * root))

    return _node(root, (a,), backward)


def norm(a) -> Tensor:
    return sqrt(dot(a, a))


def cosine(a, b) -> Tensor:
    """Cosine similarity as a differentiable scalar node."""
    return div(dot(a, b), mul(norm(a), norm(b)))


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(leaf) into every requires_grad leaf."""
    if root.data.shape != ():
        raise ShapeError("backward expects a scalar root")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node)


def grads_of(leaves: dict[str, Tensor]) -> dict[str, Array]:
    """Collect gradients after backward(); missing grads become zeros."""
    return {
        k: (t.grad if t.grad is not None else np.zeros_like(t.data))
        for k, t in leaves.items()
    }
