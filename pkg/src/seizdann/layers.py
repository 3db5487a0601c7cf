"""Neural network layers on top of the autodiff engine.

Parameters are float64 Tensors; persistent non-trainable state (batch norm
running statistics) lives in plain numpy arrays. All layers draw their
initial weights from a caller-supplied numpy Generator so that whole-model
initialization is reproducible from one seed.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .exceptions import DataError, WeightsFormatError
from .tensor import Tensor

__all__ = [
    "Module",
    "Linear",
    "Conv1d",
    "BatchNorm1d",
    "LeakyReLU",
    "MaxPool1d",
    "GlobalAvgPool1d",
    "Lstm",
    "BiLstm",
    "uniform_init",
]


def uniform_init(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    """Uniform weights in +-sqrt(1/fan_in)."""
    bound = float(np.sqrt(1.0 / fan_in))
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """Base class: parameter discovery, train/eval mode, named state.

    Child modules, parameter Tensors, buffer ndarrays, and lists of modules
    are discovered by scanning instance attributes in insertion order, which
    keeps parameter ordering deterministic across runs.
    """

    def __init__(self) -> None:
        self.training = True

    # -- traversal -----------------------------------------------------------

    def _children(self):
        for name, value in vars(self).items():
            if name == "training":
                continue
            yield name, value

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out: list[tuple[str, Tensor]] = []
        for name, value in self._children():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor):
                out.append((full, value))
            elif isinstance(value, Module):
                out.extend(value.named_parameters(f"{full}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.extend(item.named_parameters(f"{full}.{i}."))
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> list[tuple[str, np.ndarray]]:
        out: list[tuple[str, np.ndarray]] = []
        for name, value in self._children():
            full = f"{prefix}{name}"
            if isinstance(value, np.ndarray):
                out.append((full, value))
            elif isinstance(value, Module):
                out.extend(value.named_buffers(f"{full}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.extend(item.named_buffers(f"{full}.{i}."))
        return out

    def modules(self):
        yield self
        for _, value in self._children():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    # -- mode ----------------------------------------------------------------

    def train(self) -> "Module":
        for m in self.modules():
            m.training = True
        return self

    def eval(self) -> "Module":
        for m in self.modules():
            m.training = False
        return self

    # -- state serialization ---------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        """All parameters and buffers as {name: array}, insertion-ordered."""
        state: dict[str, np.ndarray] = {}
        for name, p in self.named_parameters():
            state[name] = p.data
        for name, b in self.named_buffers():
            state[name] = b
        return state

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.state_arrays().items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        state = self.state_arrays()
        unknown = sorted(set(arrays) - set(state))
        if unknown:
            raise WeightsFormatError(f"unknown state entries: {unknown}")
        missing = sorted(set(state) - set(arrays))
        if missing:
            raise WeightsFormatError(f"missing state entries: {missing}")
        params = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        for name, arr in arrays.items():
            target = state[name]
            if tuple(arr.shape) != tuple(target.shape):
                raise WeightsFormatError(
                    f"state entry {name!r}: shape {tuple(arr.shape)} does not match "
                    f"expected {tuple(target.shape)}"
                )
            if name in params:
                params[name].data = np.asarray(arr, dtype=np.float64).copy()
            else:
                buffers[name][...] = arr

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


class Linear(Module):
    """Affine map x @ W + b for (N, in_features) inputs."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        super().__init__()
        self.weight = Tensor(
            uniform_init(rng, (in_features, out_features), in_features),
            requires_grad=True,
        )
        self.bias = Tensor(
            uniform_init(rng, (out_features,), in_features), requires_grad=True
        )

    def forward(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


class Conv1d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        rng: np.random.Generator,
        kernel_size: int = 3,
        stride: int = 1,
        padding: int = 1,
    ):
        super().__init__()
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel_size
        self.weight = Tensor(
            uniform_init(rng, (out_channels, in_channels, kernel_size), fan_in),
            requires_grad=True,
        )
        self.bias = Tensor(uniform_init(rng, (out_channels,), fan_in), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        return T.conv1d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class BatchNorm1d(Module):
    """Batch normalization over (N, C) or (N, C, L) inputs.

    Train mode normalizes with biased batch statistics and updates running
    statistics (unbiased variance) as a detached side effect; eval mode
    normalizes with the stored running statistics.
    """

    def __init__(self, num_features: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.num_features = num_features
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(num_features), requires_grad=True)
        self.beta = Tensor(np.zeros(num_features), requires_grad=True)
        self.running_mean = np.zeros(num_features)
        self.running_var = np.ones(num_features)

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim == 2:
            axes: tuple = (0,)
            pshape = (1, self.num_features)
        elif x.data.ndim == 3:
            axes = (0, 2)
            pshape = (1, self.num_features, 1)
        else:
            raise DataError(f"BatchNorm1d expects 2-D or 3-D input, got ndim={x.data.ndim}")
        if x.data.shape[1] != self.num_features:
            raise DataError(
                f"BatchNorm1d({self.num_features}) got {x.data.shape[1]} channels"
            )
        gamma = self.gamma.reshape(*pshape)
        beta = self.beta.reshape(*pshape)
        if self.training:
            n = 1
            for ax in axes:
                n *= x.data.shape[ax]
            if n < 2:
                raise DataError(
                    f"BatchNorm1d needs at least 2 values per channel in train mode, got {n}"
                )
            mean = x.mean(axis=axes, keepdims=True)
            centered = x - mean
            var = (centered * centered).mean(axis=axes, keepdims=True)
            out = centered / (var + self.eps).sqrt() * gamma + beta
            # Running statistics track the batch moments outside the graph.
            batch_mean = mean.data.reshape(self.num_features)
            batch_var = var.data.reshape(self.num_features) * (n / (n - 1))
            m = self.momentum
            self.running_mean *= 1.0 - m
            self.running_mean += m * batch_mean
            self.running_var *= 1.0 - m
            self.running_var += m * batch_var
            return out
        rm = Tensor(self.running_mean.reshape(pshape))
        rstd = Tensor(np.sqrt(self.running_var + self.eps).reshape(pshape))
        return (x - rm) / rstd * gamma + beta


class LeakyReLU(Module):
    def __init__(self, negative_slope: float = 0.1):
        super().__init__()
        self.negative_slope = negative_slope

    def forward(self, x: Tensor) -> Tensor:
        return x.leaky_relu(self.negative_slope)


class MaxPool1d(Module):
    def __init__(self, kernel: int = 2, stride: int = 2):
        super().__init__()
        self.kernel = kernel
        self.stride = stride

    def forward(self, x: Tensor) -> Tensor:
        return T.maxpool1d(x, kernel=self.kernel, stride=self.stride)


class GlobalAvgPool1d(Module):
    """(N, C, L) -> (N, C) by averaging over the length axis."""

    def forward(self, x: Tensor) -> Tensor:
        return x.mean(axis=2)


class Lstm(Module):
    """Single-direction LSTM over an unbatched (T, input_size) sequence.

    Gates use separate input and recurrent weight matrices plus one bias
    each; initial hidden and cell states are zero. Input projections for
    all timesteps are computed up front so the recurrent loop only carries
    the hidden-state matmuls.
    """

    GATES = ("i", "f", "g", "o")

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        super().__init__()
        self.input_size = input_size
        self.hidden_size = hidden_size
        for gate in self.GATES:
            setattr(
                self,
                f"w_{gate}",
                Tensor(uniform_init(rng, (input_size, hidden_size), input_size),
                       requires_grad=True),
            )
            setattr(
                self,
                f"u_{gate}",
                Tensor(uniform_init(rng, (hidden_size, hidden_size), hidden_size),
                       requires_grad=True),
            )
            setattr(
                self,
                f"b_{gate}",
                Tensor(uniform_init(rng, (hidden_size,), hidden_size),
                       requires_grad=True),
            )

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.data.shape[1] != self.input_size:
            raise DataError(
                f"Lstm({self.input_size}) expects (T, {self.input_size}), "
                f"got {x.data.shape}"
            )
        steps = x.data.shape[0]
        zx = {g: x @ getattr(self, f"w_{g}") + getattr(self, f"b_{g}")
              for g in self.GATES}
        h = Tensor(np.zeros((1, self.hidden_size)))
        c = Tensor(np.zeros((1, self.hidden_size)))
        outputs = []
        for t in range(steps):
            sl = slice(t, t + 1)
            gi = (zx["i"][sl] + h @ self.u_i).sigmoid()
            gf = (zx["f"][sl] + h @ self.u_f).sigmoid()
            gg = (zx["g"][sl] + h @ self.u_g).tanh()
            go = (zx["o"][sl] + h @ self.u_o).sigmoid()
            c = gf * c + gi * gg
            h = go * c.tanh()
            outputs.append(h)
        return T.concat(outputs, axis=0)


class BiLstm(Module):
    """Stacked bidirectional LSTM for unbatched (T, input_size) sequences.

    Each layer runs one forward and one time-reversed LSTM and concatenates
    their per-timestep outputs, so every layer emits 2*hidden_size features
    and deeper layers consume that concatenation.
    """

    def __init__(
        self,
        input_size: int,
        hidden_size: int,
        num_layers: int,
        rng: np.random.Generator,
    ):
        super().__init__()
        self.hidden_size = hidden_size
        layers = []
        size = input_size
        for _ in range(num_layers):
            layers.append(Lstm(size, hidden_size, rng))
            layers.append(Lstm(size, hidden_size, rng))
            size = 2 * hidden_size
        self.layers = layers
        self.output_size = size

    def forward(self, x: Tensor) -> Tensor:
        for i in range(0, len(self.layers), 2):
            fwd = self.layers[i](x)
            bwd = self.layers[i + 1](x[::-1])[::-1]
            x = T.concat([fwd, bwd], axis=1)
        return x
