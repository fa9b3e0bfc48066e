"""Differentiable layers: conv, linear, norms, activations, pooling.

Layers are thin parameter holders; all math lives in the tensor primitives.
A ``Module`` registers parameters, buffers (running statistics), and child
modules by attribute assignment, and exposes them with hierarchical names for
serialization and the optimizer.
"""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Module:
    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "_children", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Tensor):
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name, array):
        self._buffers[name] = name
        object.__setattr__(self, name, array)

    def named_parameters(self, prefix=""):
        for name, p in self._params.items():
            yield prefix + name, p
        for cname, child in self._children.items():
            yield from child.named_parameters(prefix + cname + ".")

    def parameters(self):
        for _, p in self.named_parameters():
            yield p

    def named_buffers(self, prefix=""):
        for name in self._buffers:
            yield prefix + name, getattr(self, name)
        for cname, child in self._children.items():
            yield from child.named_buffers(prefix + cname + ".")

    def set_buffer(self, name, array):
        """Replace a (possibly nested) buffer by its hierarchical name."""
        mod = self
        parts = name.split(".")
        for part in parts[:-1]:
            mod = mod._children[part]
        if parts[-1] not in mod._buffers:
            raise KeyError(f"no buffer named {name}")
        object.__setattr__(mod, parts[-1], array)

    def modules(self):
        yield self
        for child in self._children.values():
            yield from child.modules()

    def train(self):
        for m in self.modules():
            object.__setattr__(m, "training", True)
        return self

    def eval(self):
        for m in self.modules():
            object.__setattr__(m, "training", False)
        return self

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype=np.float32) -> np.ndarray:
    """Fan-in He-uniform draw: U(-sqrt(6/fan_in), +sqrt(6/fan_in))."""
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv2d(Module):
    """k x k convolution, stride 1, same padding; k in {1, 3}."""

    def __init__(self, in_channels, out_channels, kernel_size, bias=True):
        super().__init__()
        if kernel_size not in (1, 3):
            raise ValueError(f"kernel_size must be 1 or 3, got {kernel_size}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.weight = Tensor(
            np.zeros((out_channels, in_channels, kernel_size, kernel_size), np.float32),
            requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels, np.float32), requires_grad=True) \
            if bias else None

    def init_params(self, rng):
        fan_in = self.in_channels * self.kernel_size ** 2
        self.weight.data = he_uniform(rng, self.weight.shape, fan_in,
                                      self.weight.data.dtype)
        if self.bias is not None:
            self.bias.data = np.zeros_like(self.bias.data)

    def forward(self, x):
        return T.conv2d(x, self.weight, self.bias)


class Linear(Module):
    """y = x @ W.T + b applied along the trailing axis."""

    def __init__(self, in_features, out_features, bias=True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Tensor(np.zeros((out_features, in_features), np.float32),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(out_features, np.float32), requires_grad=True) \
            if bias else None

    def init_params(self, rng):
        self.weight.data = he_uniform(rng, self.weight.shape, self.in_features,
                                      self.weight.data.dtype)
        if self.bias is not None:
            self.bias.data = np.zeros_like(self.bias.data)

    def forward(self, x):
        if x.shape[-1] != self.in_features:
            raise T.ShapeError(
                f"linear: input width {x.shape[-1]} != {self.in_features}")
        y = T.matmul(x, T.transpose(self.weight, 0, 1))
        if self.bias is not None:
            y = T.add_bias(y, self.bias, axis=-1)
        return y


class LayerNorm(Module):
    """Channel-axis layer norm; the axis is picked per call so the same layer
    serves [B,N,C] (axis=-1) and [B,C,H,W] (axis=1) layouts."""

    def __init__(self, num_features, eps=1e-5):
        super().__init__()
        self.num_features = num_features
        self.eps = eps
        self.gamma = Tensor(np.ones(num_features, np.float32), requires_grad=True)
        self.beta = Tensor(np.zeros(num_features, np.float32), requires_grad=True)

    def init_params(self, rng):
        self.gamma.data = np.ones_like(self.gamma.data)
        self.beta.data = np.zeros_like(self.beta.data)

    def forward(self, x, axis):
        return T.layer_norm(x, self.gamma, self.beta, axis=axis, eps=self.eps)


class BatchNorm(Module):
    """Batch norm over all axes but the channel axis, with running stats.

    Train mode normalizes with batch statistics and updates the running
    averages (momentum rule: r <- (1-m)*r + m*batch). Eval mode uses only the
    running statistics; before any training step those are (0, 1).
    """

    def __init__(self, num_features, eps=1e-5, momentum=0.1):
        super().__init__()
        self.num_features = num_features
        self.eps = eps
        self.momentum = momentum
        self.gamma = Tensor(np.ones(num_features, np.float32), requires_grad=True)
        self.beta = Tensor(np.zeros(num_features, np.float32), requires_grad=True)
        self.register_buffer("running_mean", np.zeros(num_features, np.float32))
        self.register_buffer("running_var", np.ones(num_features, np.float32))

    def init_params(self, rng):
        self.gamma.data = np.ones_like(self.gamma.data)
        self.beta.data = np.zeros_like(self.beta.data)
        self.register_buffer("running_mean", np.zeros_like(self.running_mean))
        self.register_buffer("running_var", np.ones_like(self.running_var))

    def forward(self, x, axis):
        if x.shape[axis % x.ndim] != self.num_features:
            raise T.ShapeError(
                f"batch_norm: channel axis size {x.shape[axis % x.ndim]} != "
                f"{self.num_features}")
        if self.training:
            out, mu, var, n = T.batch_norm_train(x, self.gamma, self.beta,
                                                 axis=axis, eps=self.eps)
            # unbiased variance for the running estimate, biased in the norm
            var_u = var * (n / max(n - 1, 1))
            m = self.momentum
            dt = self.running_mean.dtype
            self.running_mean = ((1 - m) * self.running_mean + m * mu).astype(dt)
            self.running_var = ((1 - m) * self.running_var + m * var_u).astype(dt)
            return out
        return T.batch_norm_eval(x, self.gamma, self.beta, self.running_mean,
                                 self.running_var, axis=axis, eps=self.eps)


class LeakyReLU(Module):
    def __init__(self, slope=0.01):
        super().__init__()
        self.slope = slope

    def forward(self, x):
        return T.leaky_relu(x, self.slope)


def max_pool2d(x):
    return T.max_pool2d(x)


def bilinear_upsample2x(x):
    return T.upsample_bilinear2x(x)


def init_module(module: Module, seed: int):
    """Deterministically initialize every layer of a module tree."""
    rng = np.random.default_rng(seed)
    for m in module.modules():
        if hasattr(m, "init_params"):
            m.init_params(rng)
    return module
