"""Dense float64 tensors with reverse-mode automatic differentiation.

The graph is built define-by-run: every primitive executed while gradients
are enabled becomes a node with a monotonically increasing id, so the set of
nodes reachable from a loss, ordered by id, is exactly the execution record.
``Tensor.backward`` replays that record in reverse, visiting each node once.

All arithmetic is 64-bit. There is no broadcasting magic beyond numpy's own;
gradients of broadcast operands are summed back to the operand shape.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "no_grad",
    "is_grad_enabled",
    "concat",
    "conv1d",
    "maxpool1d",
    "grad_reverse",
]

_grad_enabled = True
_node_ids = itertools.count(1)


class no_grad:
    """Context manager that disables graph recording (forward-only mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def is_grad_enabled() -> bool:
    return _grad_enabled


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A float64 array plus optional gradient buffer and graph linkage.

    Leaves are created directly (``Tensor(data, requires_grad=...)``);
    interior nodes are created by the primitives below and carry a backward
    closure that scatters the output gradient into the parents.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_nid")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._nid = 0

    # -- construction -----------------------------------------------------

    @staticmethod
    def _op(data: np.ndarray, parents: Sequence["Tensor"], backward) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
            out._nid = next(_node_ids)
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
            out._nid = 0
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    # -- backward ---------------------------------------------------------

    def backward(self) -> None:
        """Populate ``grad`` on every reachable tensor with requires_grad.

        Only valid on scalar (size-1) results of recorded operations.
        """
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise ValueError("loss does not require grad; no recorded graph to traverse")
        # Reachable interior nodes, newest first == reverse execution order.
        nodes: list[Tensor] = []
        seen = set()
        stack = [self]
        while stack:
            t = stack.pop()
            if id(t) in seen or t._backward is None:
                continue
            seen.add(id(t))
            nodes.append(t)
            stack.extend(t._parents)
        nodes.sort(key=lambda t: t._nid, reverse=True)

        self.grad = np.ones_like(self.data)
        for node in nodes:
            node._backward(node.grad)
            # Release graph references so buffers can be reclaimed.
            node._parents = ()
            node._backward = None
        return None

    @staticmethod
    def _accumulate(t: "Tensor", g: np.ndarray) -> None:
        # Never adds in place: stored buffers may be aliased by other nodes.
        if not t.requires_grad:
            return
        if t.grad is None:
            t.grad = g
        else:
            t.grad = t.grad + g

    # -- arithmetic primitives ---------------------------------------------

    @staticmethod
    def _wrap(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    def __add__(self, other):
        a, b = self, Tensor._wrap(other)
        data = a.data + b.data

        def backward(g):
            Tensor._accumulate(a, _unbroadcast(g, a.data.shape))
            Tensor._accumulate(b, _unbroadcast(g, b.data.shape))

        return Tensor._op(data, (a, b), backward)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self, Tensor._wrap(other)
        data = a.data - b.data

        def backward(g):
            Tensor._accumulate(a, _unbroadcast(g, a.data.shape))
            Tensor._accumulate(b, _unbroadcast(-g, b.data.shape))

        return Tensor._op(data, (a, b), backward)

    def __rsub__(self, other):
        return Tensor._wrap(other).__sub__(self)

    def __mul__(self, other):
        a, b = self, Tensor._wrap(other)
        data = a.data * b.data

        def backward(g):
            Tensor._accumulate(a, _unbroadcast(g * b.data, a.data.shape))
            Tensor._accumulate(b, _unbroadcast(g * a.data, b.data.shape))

        return Tensor._op(data, (a, b), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self, Tensor._wrap(other)
        data = a.data / b.data

        def backward(g):
            Tensor._accumulate(a, _unbroadcast(g / b.data, a.data.shape))
            Tensor._accumulate(b, _unbroadcast(-g * data / b.data, b.data.shape))

        return Tensor._op(data, (a, b), backward)

    def __rtruediv__(self, other):
        return Tensor._wrap(other).__truediv__(self)

    def __neg__(self):
        a = self

        def backward(g):
            Tensor._accumulate(a, -g)

        return Tensor._op(-a.data, (a,), backward)

    def __pow__(self, exponent: float):
        a = self
        p = float(exponent)
        data = a.data**p

        def backward(g):
            Tensor._accumulate(a, g * p * a.data ** (p - 1.0))

        return Tensor._op(data, (a,), backward)

    def __matmul__(self, other):
        a, b = self, Tensor._wrap(other)
        if a.data.ndim != 2 or b.data.ndim != 2:
            raise ValueError("matmul supports 2-D operands only")
        data = a.data @ b.data

        def backward(g):
            Tensor._accumulate(a, g @ b.data.T)
            Tensor._accumulate(b, a.data.T @ g)

        return Tensor._op(data, (a, b), backward)

    # -- shape primitives ---------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        orig = a.data.shape
        data = a.data.reshape(shape)

        def backward(g):
            Tensor._accumulate(a, np.ascontiguousarray(g).reshape(orig))

        return Tensor._op(data, (a,), backward)

    def transpose(self, *axes):
        a = self
        axes = axes or tuple(reversed(range(a.data.ndim)))
        inv = np.argsort(axes)
        data = np.ascontiguousarray(a.data.transpose(axes))

        def backward(g):
            Tensor._accumulate(a, np.ascontiguousarray(g.transpose(tuple(inv))))

        return Tensor._op(data, (a,), backward)

    def __getitem__(self, key):
        a = self
        data = a.data[key]
        if data.base is not None:
            data = data.copy()

        def backward(g):
            # Assignment scatter: correct for basic slicing and for advanced
            # indexing whose selected positions never repeat.
            gx = np.zeros_like(a.data)
            gx[key] = g
            Tensor._accumulate(a, gx)

        return Tensor._op(data, (a,), backward)

    # -- reductions ----------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        a = self
        data = a.data.sum(axis=axis, keepdims=keepdims)
        if axis is None:
            axes = tuple(range(a.data.ndim))
        elif isinstance(axis, int):
            axes = (axis % a.data.ndim,)
        else:
            axes = tuple(ax % a.data.ndim for ax in axis)

        def backward(g):
            if not keepdims:
                g = np.expand_dims(g, axes) if axes else g
            Tensor._accumulate(
                a, np.ascontiguousarray(np.broadcast_to(g, a.data.shape))
            )

        return Tensor._op(np.asarray(data), (a,), backward)

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else (
            np.prod([self.data.shape[ax] for ax in np.atleast_1d(axis)])
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    # -- elementwise nonlinearities -------------------------------------------

    def exp(self):
        a = self
        data = np.exp(a.data)

        def backward(g):
            Tensor._accumulate(a, g * data)

        return Tensor._op(data, (a,), backward)

    def log(self):
        a = self
        data = np.log(a.data)

        def backward(g):
            Tensor._accumulate(a, g / a.data)

        return Tensor._op(data, (a,), backward)

    def sqrt(self):
        a = self
        data = np.sqrt(a.data)

        def backward(g):
            Tensor._accumulate(a, g * (0.5 / data))

        return Tensor._op(data, (a,), backward)

    def tanh(self):
        a = self
        data = np.tanh(a.data)

        def backward(g):
            Tensor._accumulate(a, g * (1.0 - data * data))

        return Tensor._op(data, (a,), backward)

    def sigmoid(self):
        a = self
        # Stable in both tails: exp of a non-positive argument only.
        e = np.exp(-np.abs(a.data))
        data = np.where(a.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

        def backward(g):
            Tensor._accumulate(a, g * data * (1.0 - data))

        return Tensor._op(data, (a,), backward)

    def leaky_relu(self, negative_slope: float = 0.1):
        a = self
        # Subgradient at 0 takes the identity branch.
        factor = np.where(a.data >= 0, 1.0, negative_slope)
        data = a.data * factor

        def backward(g):
            Tensor._accumulate(a, g * factor)

        return Tensor._op(data, (a,), backward)

    def clip(self, lo: float, hi: float):
        a = self
        data = np.clip(a.data, lo, hi)
        inside = (a.data > lo) & (a.data < hi)

        def backward(g):
            Tensor._accumulate(a, g * inside)

        return Tensor._op(data, (a,), backward)

    def softmax(self, axis: int = -1):
        a = self
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        data = e / e.sum(axis=axis, keepdims=True)

        def backward(g):
            dot = (g * data).sum(axis=axis, keepdims=True)
            Tensor._accumulate(a, data * (g - dot))

        return Tensor._op(data, (a,), backward)


# -- multi-input / structured primitives ---------------------------------------


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    ts = [Tensor._wrap(t) for t in tensors]
    if not ts:
        raise ValueError("concat of an empty sequence")
    data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            Tensor._accumulate(t, g[tuple(idx)])

    return Tensor._op(data, ts, backward)


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation over the last axis.

    x: (N, C_in, L); weight: (C_out, C_in, K); bias: (C_out,).
    Returns (N, C_out, L_out) with L_out = (L + 2*padding - K) // stride + 1.
    """
    n, c_in, length = x.data.shape
    c_out, c_in_w, k = weight.data.shape
    if c_in != c_in_w:
        raise ValueError(f"channel mismatch: input has {c_in}, weight expects {c_in_w}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    l_pad = length + 2 * padding
    if l_pad < k:
        raise ValueError(f"input length {length} too short for kernel {k}")
    l_out = (l_pad - k) // stride + 1
    cols = np.lib.stride_tricks.sliding_window_view(xp, k, axis=2)[:, :, ::stride, :]
    # (N, C_in, L_out, K) -> (N*L_out, C_in*K) for a single GEMM.
    cols2 = np.ascontiguousarray(cols.transpose(0, 2, 1, 3)).reshape(n * l_out, c_in * k)
    w2 = weight.data.reshape(c_out, c_in * k)
    out2 = cols2 @ w2.T
    if bias is not None:
        out2 += bias.data
    data = np.ascontiguousarray(out2.reshape(n, l_out, c_out).transpose(0, 2, 1))

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        g2 = np.ascontiguousarray(g.transpose(0, 2, 1)).reshape(n * l_out, c_out)
        Tensor._accumulate(weight, (g2.T @ cols2).reshape(c_out, c_in, k))
        if bias is not None:
            Tensor._accumulate(bias, g2.sum(axis=0))
        if x.requires_grad:
            gcols = (g2 @ w2).reshape(n, l_out, c_in, k).transpose(0, 2, 1, 3)
            gxp = np.zeros((n, c_in, l_pad))
            for kk in range(k):
                gxp[:, :, kk:kk + stride * l_out:stride] += gcols[:, :, :, kk]
            gx = gxp[:, :, padding:l_pad - padding] if padding else gxp
            Tensor._accumulate(x, np.ascontiguousarray(gx))

    return Tensor._op(data, parents, backward)


def maxpool1d(x: Tensor, kernel: int = 2, stride: int = 2) -> Tensor:
    """Per-window maxima over the last axis; a trailing partial window is dropped.

    Only kernel == stride pooling is supported. Gradient routes to the argmax
    of each window; ties break toward the earliest index.
    """
    if kernel != stride:
        raise ValueError("maxpool1d supports kernel == stride only")
    n, c, length = x.data.shape
    if length < kernel:
        raise ValueError(f"input length {length} shorter than pooling kernel {kernel}")
    l_out = length // kernel
    windows = x.data[:, :, :l_out * kernel].reshape(n, c, l_out, kernel)
    idx = windows.argmax(axis=3)
    data = np.take_along_axis(windows, idx[..., None], axis=3)[..., 0]

    def backward(g):
        gw = np.zeros((n, c, l_out, kernel))
        np.put_along_axis(gw, idx[..., None], g[..., None], axis=3)
        gx = np.zeros_like(x.data)
        gx[:, :, :l_out * kernel] = gw.reshape(n, c, l_out * kernel)
        Tensor._accumulate(x, gx)

    return Tensor._op(np.ascontiguousarray(data), (x,), backward)


def grad_reverse(x: Tensor, lam: float) -> Tensor:
    """Identity forward; backward multiplies the upstream gradient by -lam."""
    if lam < 0:
        raise ValueError(f"gradient reversal strength must be >= 0, got {lam}")
    lam = float(lam)

    def backward(g):
        Tensor._accumulate(x, g * (-lam))

    return Tensor._op(x.data, (x,), backward)
