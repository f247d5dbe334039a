"""Rank-2 tensors with reverse-mode gradients, plus the Adam update.

Every op builds a node holding its parents and a closure that pushes the
output gradient back to them. ``Tensor.backward`` walks the graph in reverse
topological order. All data is float64.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import NumericError, ShapeError

BCE_EPS = 1e-7


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, _parents: tuple = (), op: str = ""):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are rank 2, got shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward: Callable[[], None] | None = None
        self.op = op

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def T(self) -> Tensor:
        return transpose(self)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.asarray(grad, dtype=np.float64))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward()


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    for axis in (0, 1):
        if shape[axis] == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor) -> tuple[int, int]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"cannot broadcast {a.shape} with {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)
    out = Tensor(a.data + b.data, _parents=(a, b), op="add")

    def backward():
        a._accumulate(_unbroadcast(out.grad, a.shape))
        b._accumulate(_unbroadcast(out.grad, b.shape))

    out._backward = backward
    return out


def sub(a, b) -> Tensor:
    return add(a, mul(b, -1.0))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)
    out = Tensor(a.data * b.data, _parents=(a, b), op="mul")

    def backward():
        a._accumulate(_unbroadcast(out.grad * b.data, a.shape))
        b._accumulate(_unbroadcast(out.grad * a.data, b.shape))

    out._backward = backward
    return out


def sequential_product(a: np.ndarray, b: np.ndarray, order: np.ndarray | None = None) -> np.ndarray:
    """Matrix product whose inner sum runs term by term in ``order``.

    Each output row depends only on its own input row and the visiting order,
    never on the row's position, so permuting rows of ``a`` permutes the
    result exactly. BLAS gives no such guarantee.
    """
    ks = range(a.shape[1]) if order is None else order
    out = np.zeros((a.shape[0], b.shape[1]))
    for k in ks:
        out += a[:, k:k + 1] * b[k:k + 1, :]
    return out


def matmul(a, b, sequential: bool = False, order: np.ndarray | None = None) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.cols != b.rows:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    data = sequential_product(a.data, b.data, order) if sequential else a.data @ b.data
    out = Tensor(data, _parents=(a, b), op="matmul")

    def backward():
        a._accumulate(out.grad @ b.data.T)
        b._accumulate(a.data.T @ out.grad)

    out._backward = backward
    return out


def transpose(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data.T, _parents=(x,), op="transpose")

    def backward():
        x._accumulate(out.grad.T)

    out._backward = backward
    return out


def reshape(x, rows: int, cols: int) -> Tensor:
    x = as_tensor(x)
    if rows * cols != x.data.size:
        raise ShapeError(f"cannot reshape {x.shape} to {(rows, cols)}")
    out = Tensor(x.data.reshape(rows, cols), _parents=(x,), op="reshape")

    def backward():
        x._accumulate(out.grad.reshape(x.shape))

    out._backward = backward
    return out


def sum_all(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data.sum(), _parents=(x,), op="sum")

    def backward():
        x._accumulate(np.full(x.shape, out.grad[0, 0]))

    out._backward = backward
    return out


def mean_all(x) -> Tensor:
    x = as_tensor(x)
    return mul(sum_all(x), 1.0 / x.data.size)


def take_rows(x, idx: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= x.rows):
        raise ShapeError(f"row index out of range for {x.shape}")
    out = Tensor(x.data[idx].reshape(len(idx), x.cols), _parents=(x,), op="take_rows")

    def backward():
        g = np.zeros_like(x.data)
        np.add.at(g, idx, out.grad)
        x._accumulate(g)

    out._backward = backward
    return out


def concat_rows(*parts) -> Tensor:
    """Join tensors row by row: output row i is ``a_i ‖ b_i ‖ ...``."""
    parts = [as_tensor(p) for p in parts]
    if len({p.rows for p in parts}) != 1:
        raise ShapeError(f"concat_rows needs equal row counts, got {[p.shape for p in parts]}")
    out = Tensor(np.concatenate([p.data for p in parts], axis=1), _parents=tuple(parts), op="concat")
    bounds = np.cumsum([0] + [p.cols for p in parts])

    def backward():
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            p._accumulate(out.grad[:, lo:hi])

    out._backward = backward
    return out


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    d = x.data
    # Split by sign so exp never overflows.
    e = np.exp(-np.abs(d))
    y = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    out = Tensor(y, _parents=(x,), op="sigmoid")

    def backward():
        x._accumulate(out.grad * y * (1.0 - y))

    out._backward = backward
    return out


def relu(x) -> Tensor:
    x = as_tensor(x)
    pos = x.data > 0
    out = Tensor(np.maximum(x.data, 0.0), _parents=(x,), op="relu")  # maximum keeps NaN visible

    def backward():
        x._accumulate(out.grad * pos)

    out._backward = backward
    return out


def leaky_relu(x, slope: float = 0.2) -> Tensor:
    x = as_tensor(x)
    pos = x.data > 0
    out = Tensor(np.where(pos, x.data, slope * x.data), _parents=(x,), op="leaky_relu")

    def backward():
        x._accumulate(out.grad * np.where(pos, 1.0, slope))

    out._backward = backward
    return out


def elu(x, alpha: float = 1.0) -> Tensor:
    x = as_tensor(x)
    pos = x.data > 0
    neg_part = alpha * np.expm1(np.minimum(x.data, 0.0))
    out = Tensor(np.where(pos, x.data, neg_part), _parents=(x,), op="elu")

    def backward():
        x._accumulate(out.grad * np.where(pos, 1.0, neg_part + alpha))

    out._backward = backward
    return out


def softmax_rows(x, mask: np.ndarray | None = None, order: np.ndarray | None = None) -> Tensor:
    """Row softmax restricted to ``mask``; masked entries come out exactly 0.

    ``order`` fixes the column order used for the normalizing sums.
    """
    x = as_tensor(x)
    if mask is None:
        mask = np.ones(x.shape, dtype=bool)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    if not mask.any(axis=1).all():
        bad = int(np.flatnonzero(~mask.any(axis=1))[0])
        raise ShapeError(f"softmax row {bad} is fully masked")
    z = np.where(mask, x.data, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    denom = (e if order is None else e[:, order]).sum(axis=1, keepdims=True)
    y = e / denom
    out = Tensor(y, _parents=(x,), op="softmax")

    def backward():
        g = out.grad
        inner = (g * y).sum(axis=1, keepdims=True)
        x._accumulate(y * (g - inner))

    out._backward = backward
    return out


def dropout(x, rate: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout; identity (the same object) in eval mode or at rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate {rate} outside [0, 1)")
    x = as_tensor(x)
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs a random generator")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    out = Tensor(x.data * keep, _parents=(x,), op="dropout")

    def backward():
        x._accumulate(out.grad * keep)

    out._backward = backward
    return out


def bce_loss(probs, targets) -> Tensor:
    """Mean binary cross-entropy over every entry, probabilities clamped to [eps, 1-eps]."""
    probs = as_tensor(probs)
    y = np.asarray(targets.data if isinstance(targets, Tensor) else targets, dtype=np.float64)
    if y.ndim == 1:
        y = y.reshape(1, -1)
    if y.shape != probs.shape:
        raise ShapeError(f"bce_loss shape mismatch: probs {probs.shape}, targets {y.shape}")
    p = np.clip(probs.data, BCE_EPS, 1.0 - BCE_EPS)
    n = p.size
    loss = -np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    out = Tensor(loss, _parents=(probs,), op="bce")

    def backward():
        probs._accumulate(out.grad[0, 0] * (p - y) / (p * (1.0 - p) * n))

    out._backward = backward
    return out


class ParamStore:
    """Named trainable tensors with Adam moment buffers."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, value) -> Tensor:
        if name in self.params:
            raise KeyError(f"parameter {name} already registered")
        t = Tensor(value, requires_grad=True, op=name)
        self.params[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self):
        return iter(self.params)

    def names(self) -> list[str]:
        return sorted(self.params)

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: self.params[name].data.copy() for name in self.names()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, arr in arrays.items():
            if name in self.params:
                if self.params[name].shape != arr.shape:
                    raise ShapeError(f"parameter {name}: shape {arr.shape} != {self.params[name].shape}")
                self.params[name].data = np.array(arr, dtype=np.float64)
            else:
                self.add(name, arr)

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> ParamStore:
        store = cls()
        for name in sorted(arrays):
            store.add(name, arrays[name])
        return store


def adam_step(store: ParamStore, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, t: int | None = None) -> ParamStore:
    """One bias-corrected Adam update in place; parameters without a gradient are skipped."""
    t = store.step + 1 if t is None else t
    if t < 1:
        raise ValueError("Adam step index starts at 1")
    for name in store.names():
        p = store.params[name]
        if p.grad is None:
            continue
        g = p.grad
        store.m[name] = beta1 * store.m[name] + (1.0 - beta1) * g
        store.v[name] = beta2 * store.v[name] + (1.0 - beta2) * g * g
        m_hat = store.m[name] / (1.0 - beta1 ** t)
        v_hat = store.v[name] / (1.0 - beta2 ** t)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)
    store.step = t
    return store


def numeric_gradient(f: Callable[[], float], x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central finite differences of scalar ``f`` w.r.t. array ``x`` (perturbed in place)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        ix = it.multi_index
        orig = x[ix]
        x[ix] = orig + h
        fp = f()
        x[ix] = orig - h
        fm = f()
        x[ix] = orig
        grad[ix] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    num = np.linalg.norm(analytic - numeric)
    den = max(np.linalg.norm(analytic), np.linalg.norm(numeric), floor)
    return float(num / den)


def gradient_check(loss_fn: Callable[[], Tensor], tensors: Iterable[Tensor], h: float = 1e-4) -> float:
    """Worst relative error between backprop and finite differences over ``tensors``."""
    tensors = list(tensors)
    for t in tensors:
        t.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]
    worst = 0.0
    for t, a in zip(tensors, analytic):
        n = numeric_gradient(lambda: loss_fn().item(), t.data, h)
        worst = max(worst, relative_error(a, n))
    return worst


def check_finite(x: Tensor, what: str) -> None:
    if not np.all(np.isfinite(x.data)):
        raise NumericError(f"non-finite values in {what}")
