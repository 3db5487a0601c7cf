"""Central finite-difference verification of analytic gradients.

Every differentiable building block is registered here under a short id.
``grad_check(name)`` builds a randomized instance, reduces the output to a
scalar through a fixed random projection, and compares the recorded backward
pass against central differences on every input element.

Piecewise-linear inputs are sampled away from their kinks (margin 0.05) so
the comparison is made where the derivative exists.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensor as T
from .tensor import Tensor

__all__ = ["grad_check", "finite_difference_gradients", "registered_checks", "GradCheckResult"]


@dataclass
class GradCheckResult:
    name: str
    passed: bool
    max_rel_error: float
    tolerance: float

    def __bool__(self) -> bool:
        return self.passed


def _rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max elementwise |a - n| / max(1, |a|, |n|) (unit-floored relative error)."""
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def finite_difference_gradients(fn: Callable[..., Tensor], inputs: list[np.ndarray],
                                step: float = 1e-4) -> list[np.ndarray]:
    """Central-difference gradients of the scalar fn(*inputs) w.r.t. every input."""
    grads = []
    for i, base in enumerate(inputs):
        g = np.zeros_like(base)
        flat = g.reshape(-1)
        work = [a.copy() for a in inputs]
        wflat = work[i].reshape(-1)
        for j in range(base.size):
            orig = wflat[j]
            wflat[j] = orig + step
            hi = fn(*[Tensor(a) for a in work]).item()
            wflat[j] = orig - step
            lo = fn(*[Tensor(a) for a in work]).item()
            wflat[j] = orig
            flat[j] = (hi - lo) / (2.0 * step)
        grads.append(g)
    return grads


def _analytic_gradients(fn: Callable[..., Tensor], inputs: list[np.ndarray]) -> list[np.ndarray]:
    ts = [Tensor(a, requires_grad=True) for a in inputs]
    out = fn(*ts)
    out.backward()
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in ts]


def _away_from_zero(a: np.ndarray, margin: float = 0.05) -> np.ndarray:
    """Push values inside (-margin, margin) out to the margin, keeping sign."""
    sign = np.where(a >= 0, 1.0, -1.0)
    return np.where(np.abs(a) < margin, sign * margin, a)


def _projected(fn: Callable[..., Tensor], rng: np.random.Generator) -> Callable[..., Tensor]:
    """Reduce an arbitrary-shaped op to a scalar via a fixed random projection."""
    proj: dict[tuple, np.ndarray] = {}

    def scalar_fn(*ts: Tensor) -> Tensor:
        out = fn(*ts)
        key = out.data.shape
        if key not in proj:
            proj[key] = rng.normal(size=key)
        return (out * Tensor(proj[key])).sum()

    return scalar_fn


# -- registry -----------------------------------------------------------------
#
# Each entry: default shape -> (fn over Tensors, list of input arrays).
# `expected_scale` rescales the numeric gradient before comparison; the
# gradient reversal layer is defined to propagate -lam times the true
# derivative of its identity forward, so its entry checks exactly that.

_GRL_LAMBDA = 0.7


def _build_case(name: str, shape, rng: np.random.Generator):
    if name == "add":
        a, b = rng.normal(size=shape), rng.normal(size=shape)
        return lambda x, y: x + y, [a, b], 1.0
    if name == "mul":
        a, b = rng.normal(size=shape), rng.normal(size=shape)
        return lambda x, y: x * y, [a, b], 1.0
    if name == "div":
        a = rng.normal(size=shape)
        b = _away_from_zero(rng.normal(size=shape), 0.5)
        return lambda x, y: x / y, [a, b], 1.0
    if name == "matmul":
        n = shape[0]
        a, b = rng.normal(size=(n, n)), rng.normal(size=(n, n))
        return lambda x, y: x @ y, [a, b], 1.0
    if name == "sum":
        return lambda x: x.sum(), [rng.normal(size=shape)], 1.0
    if name == "mean":
        return lambda x: x.mean(axis=-1), [rng.normal(size=shape)], 1.0
    if name == "exp":
        return lambda x: x.exp(), [rng.normal(size=shape)], 1.0
    if name == "log":
        return lambda x: x.log(), [rng.uniform(0.5, 2.0, size=shape)], 1.0
    if name == "sqrt":
        return lambda x: x.sqrt(), [rng.uniform(0.5, 2.0, size=shape)], 1.0
    if name == "tanh":
        return lambda x: x.tanh(), [rng.normal(size=shape)], 1.0
    if name == "sigmoid":
        return lambda x: x.sigmoid(), [rng.normal(size=shape)], 1.0
    if name == "softmax":
        return lambda x: x.softmax(axis=-1), [rng.normal(size=shape)], 1.0
    if name == "leaky_relu":
        a = _away_from_zero(rng.normal(size=shape))
        return lambda x: x.leaky_relu(0.1), [a], 1.0
    if name == "reshape":
        a = rng.normal(size=shape)
        return lambda x: x.reshape(-1), [a], 1.0
    if name == "slice":
        a = rng.normal(size=shape)
        return lambda x: x[1:], [a], 1.0
    if name == "concat":
        a, b = rng.normal(size=shape), rng.normal(size=shape)
        return lambda x, y: T.concat([x, y], axis=0), [a, b], 1.0
    if name == "clip":
        a = _away_from_zero(rng.normal(size=shape) * 2.0 - 1.0)  # keep off the bounds
        a = np.clip(a, -2.5, 2.5)
        a = np.where(np.abs(np.abs(a) - 1.0) < 0.05, a * 1.2, a)
        return lambda x: x.clip(-1.0, 1.0), [a], 1.0
    if name == "affine":
        n_in, n_out = 6, 4
        x = rng.normal(size=(3, n_in))
        w = rng.normal(size=(n_in, n_out))
        b = rng.normal(size=(n_out,))
        return lambda xx, ww, bb: xx @ ww + bb, [x, w, b], 1.0
    if name == "conv1d":
        c_in, c_out, length, k = 2, 3, 8, 3
        x = rng.normal(size=(2, c_in, length))
        w = rng.normal(size=(c_out, c_in, k))
        b = rng.normal(size=(c_out,))
        return (lambda xx, ww, bb: T.conv1d(xx, ww, bb, stride=1, padding=1),
                [x, w, b], 1.0)
    if name == "maxpool1d":
        x = rng.normal(size=(2, 3, 9))
        return lambda xx: T.maxpool1d(xx, 2, 2), [x], 1.0
    if name == "global_avg_pool":
        x = rng.normal(size=(2, 3, 7))
        return lambda xx: xx.mean(axis=-1), [x], 1.0
    if name == "batchnorm1d":
        # Train-mode normalization over (N, L) as a pure function of (x, gamma, beta).
        x = rng.normal(size=(4, 3, 5))
        gamma = rng.uniform(0.5, 1.5, size=(3, 1))
        beta = rng.normal(size=(3, 1))

        def bn(xx, gg, bb):
            mu = xx.mean(axis=(0, 2), keepdims=True)
            var = ((xx - mu) * (xx - mu)).mean(axis=(0, 2), keepdims=True)
            return gg * ((xx - mu) / (var + 1e-5).sqrt()) + bb

        return bn, [x, gamma, beta], 1.0
    if name == "lstm_cell":
        n_in, n_hidden = 4, 3

        def cell(x, h, c, wx, wh, b):
            z = x @ wx + h @ wh + b
            i = z[:, 0:n_hidden].sigmoid()
            f = z[:, n_hidden:2 * n_hidden].sigmoid()
            g = z[:, 2 * n_hidden:3 * n_hidden].tanh()
            o = z[:, 3 * n_hidden:].sigmoid()
            c_new = f * c + i * g
            return T.concat([o * c_new.tanh(), c_new], axis=1)

        arrs = [rng.normal(size=(2, n_in)), rng.normal(size=(2, n_hidden)),
                rng.normal(size=(2, n_hidden)), rng.normal(size=(n_in, 4 * n_hidden)),
                rng.normal(size=(n_hidden, 4 * n_hidden)), rng.normal(size=(4 * n_hidden,))]
        return cell, arrs, 1.0
    if name == "grad_reversal":
        a = rng.normal(size=shape)
        # Backward is defined as -lam times the identity's true derivative.
        return lambda x: T.grad_reverse(x, _GRL_LAMBDA), [a], -_GRL_LAMBDA
    raise KeyError(f"no gradient check registered for {name!r}")


_DEFAULT_SHAPES = {
    "add": (5,), "mul": (5,), "div": (5,), "matmul": (4,), "sum": (3, 4),
    "mean": (3, 4), "exp": (5,), "log": (5,), "sqrt": (5,), "tanh": (5,),
    "sigmoid": (5,), "softmax": (3, 5), "leaky_relu": (10,), "reshape": (3, 4),
    "slice": (5, 3), "concat": (2, 3), "clip": (12,), "affine": None,
    "conv1d": None, "maxpool1d": None, "global_avg_pool": None,
    "batchnorm1d": None, "lstm_cell": None, "grad_reversal": (6,),
}


def registered_checks() -> list[str]:
    return sorted(_DEFAULT_SHAPES)


def grad_check(name: str, shape=None, tolerance: float = 1e-5, seed: int = 0,
               step: float = 1e-4) -> GradCheckResult:
    """Compare analytic and central-difference gradients for one registered op."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if name not in _DEFAULT_SHAPES:
        raise KeyError(f"no gradient check registered for {name!r}")
    rng = np.random.default_rng(seed)
    fn, inputs, scale = _build_case(name, shape or _DEFAULT_SHAPES[name], rng)
    scalar_fn = _projected(fn, rng)
    analytic = _analytic_gradients(scalar_fn, inputs)
    numeric = finite_difference_gradients(scalar_fn, inputs, step=step)
    err = max(_rel_error(a, scale * n) for a, n in zip(analytic, numeric))
    return GradCheckResult(name=name, passed=err < tolerance,
                           max_rel_error=err, tolerance=tolerance)
