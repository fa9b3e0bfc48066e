"""Decoupled-weight-decay Adam and the cosine learning-rate schedule."""

from __future__ import annotations

import math

import numpy as np


class AdamW:
    """p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p.

    Weight decay multiplies the parameter directly (decoupled from the
    moment estimates). Norm affine parameters and biases are decayed too;
    the recipe states a single weight-decay value.
    """

    def __init__(self, named_params, lr=1e-3, weight_decay=1e-2,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(named_params)
        if not self.params:
            raise ValueError("optimizer needs at least one parameter")
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params}

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for name, p in self.params:
            if p.grad is None:
                raise RuntimeError(f"parameter {name} has no gradient")
            g = p.grad.astype(p.data.dtype, copy=False)
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            update = m_hat / (np.sqrt(v_hat) + self.eps)
            p.data = p.data - lr * update - lr * self.weight_decay * p.data

    def zero_grad(self):
        for _, p in self.params:
            p.zero_grad()

    def state_tensors(self):
        """Moment arrays plus step counter, keyed for checkpointing."""
        out = {}
        for name, _ in self.params:
            out[f"optim.m.{name}"] = self.m[name]
            out[f"optim.v.{name}"] = self.v[name]
        out["optim.t"] = np.array([self.t], dtype=np.float32)
        return out

    def load_state_tensors(self, table):
        for name, _ in self.params:
            for prefix, store in (("optim.m.", self.m), ("optim.v.", self.v)):
                key = prefix + name
                if key not in table:
                    raise KeyError(f"missing optimizer state {key}")
                if table[key].shape != store[name].shape:
                    raise ValueError(
                        f"optimizer state {key}: shape {table[key].shape} != "
                        f"{store[name].shape}")
                store[name] = table[key].astype(np.float32, copy=True)
        self.t = int(table["optim.t"][0])


def cosine_lr(epoch: int, lr0: float = 1e-3, t_max: int = 50,
              eta_min: float = 1e-5, mode: str = "periodic") -> float:
    """eta_min + (lr0 - eta_min) * (1 + cos(pi * epoch / t_max)) / 2.

    ``periodic`` evaluates the closed form for every epoch (the curve rises
    again after t_max); ``floor`` holds eta_min once t_max is reached.
    """
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if mode == "floor":
        epoch = min(epoch, t_max)
    elif mode != "periodic":
        raise ValueError(f"unknown scheduler mode {mode!r}")
    return eta_min + (lr0 - eta_min) * (1.0 + math.cos(math.pi * epoch / t_max)) / 2.0
