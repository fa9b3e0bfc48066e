"""The layer zoo and the hybrid linear/conv block.

Run: python demos/02_layers_and_block.py
"""

import numpy as np

from ucmnet import UcmBlock
from ucmnet import tensor as T
from ucmnet.layers import BatchNorm, Conv2d, LayerNorm, init_module
from ucmnet.tensor import Tensor, no_grad

print("== same-padding convolution keeps the map size ==")
conv = init_module(Conv2d(3, 8, 3), seed=0)
x = Tensor(np.random.default_rng(0).normal(size=(1, 3, 16, 16)).astype(np.float32))
print(f"conv3x3(3->8): {x.shape} -> {conv(x).shape}, "
      f"{conv.num_parameters()} params (3*8*9 + 8)")

print("\n== an identity kernel really is the identity ==")
ident = Conv2d(1, 1, 3)
w = np.zeros((1, 1, 3, 3), np.float32)
w[0, 0, 1, 1] = 1.0
ident.weight.data = w
probe = Tensor(np.random.default_rng(1).normal(size=(1, 1, 4, 4)).astype(np.float32))
print(f"max |conv(x) - x| = {np.abs(ident(probe).numpy() - probe.numpy()).max():.2e}")

print("\n== norms: layer norm per position, batch norm per channel ==")
tokens = Tensor(np.random.default_rng(2).normal(3.0, 2.0, size=(4, 10, 6)).astype(np.float32))
ln_out = LayerNorm(6)(tokens, axis=-1).numpy()
print(f"layer norm output: per-position mean ~ {np.abs(ln_out.mean(-1)).max():.1e}")
bn = BatchNorm(6)
bn_out = bn(tokens, axis=-1).numpy()
print(f"batch norm train output: per-channel mean ~ {np.abs(bn_out.mean((0, 1))).max():.1e}, "
      f"var ~ {bn_out.var((0, 1)).mean():.3f}")
print(f"running mean after one batch (momentum 0.1): {bn.running_mean.round(3)}")

print("\n== the hybrid block: tokens <-> maps with a residual ==")
block = init_module(UcmBlock(8), seed=3)
fmap = Tensor(np.random.default_rng(4).normal(size=(2, 8, 12, 12)).astype(np.float32))
with no_grad():
    out = block(fmap)
print(f"input  [B,C,H,W] = {fmap.shape}")
print(f"output [B,N,C]   = {out.shape}   (N = H*W = 144)")

print("\nzeroing every block parameter leaves the pure residual:")
for p in block.parameters():
    p.data = np.zeros_like(p.data)
with no_grad():
    out0 = block(fmap)
residual = fmap.numpy().reshape(2, 8, 144).transpose(0, 2, 1)
print(f"max |block(x) - flatten(x)| = {np.abs(out0.numpy() - residual).max():.2e}")
