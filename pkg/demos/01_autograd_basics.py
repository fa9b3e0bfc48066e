"""Tour of the tensor core: values, the gradient tape, and backward.

Run: python demos/01_autograd_basics.py
"""

import numpy as np

from ucmnet import Tensor, backward
from ucmnet import tensor as T

print("== building a small computation ==")
x = Tensor(np.array([1.0, -2.0, 3.0], np.float32), requires_grad=True)
w = Tensor(np.array([0.5, 0.5, 0.5], np.float32), requires_grad=True)
y = T.mul(x, w)
loss = T.tsum(T.mul(y, y))
print(f"x = {x.numpy()},  w = {w.numpy()}")
print(f"loss = sum((x*w)^2) = {loss.item():.4f}")

backward(loss)
print(f"d loss / d x = {x.grad}")
print(f"d loss / d w = {w.grad}")

print("\n== checking one entry against finite differences ==")
h = 1e-4
xp = x.numpy().copy()
xp[0] += h
up = float(np.sum((xp * w.numpy()) ** 2))
xp[0] -= 2 * h
down = float(np.sum((xp * w.numpy()) ** 2))
print(f"numeric  d loss / d x[0] = {(up - down) / (2 * h):.6f}")
print(f"analytic d loss / d x[0] = {x.grad[0]:.6f}")

print("\n== shape algebra flows gradients through reordering ==")
m = Tensor(np.arange(6, dtype=np.float32).reshape(1, 2, 3), requires_grad=True)
flipped = T.transpose(m, 1, 2)          # [1,3,2]
print(f"transpose maps (0,1,2) -> (0,2,1): {m.numpy()[0,1,2]} == {flipped.numpy()[0,2,1]}")
backward(T.tsum(T.mul(flipped, flipped)))
print(f"gradient returned in the original layout:\n{m.grad[0]}")

print("\n== the tape is consumed by backward ==")
a = Tensor(np.array([2.0], np.float32), requires_grad=True)
l = T.tsum(T.mul(a, a))
backward(l)
try:
    backward(l)
except RuntimeError as exc:
    print(f"second backward raises: {exc}")
