"""Dense tensors with reverse-mode automatic differentiation.

A ``Tensor`` wraps a numpy array plus an optional gradient. Operations on
tensors record nodes on a global gradient tape (define-by-run); ``backward``
replays the tape in reverse append order and accumulates gradients into every
tensor that requires them. The tape is consumed by ``backward`` and rebuilt by
the next forward pass.

Float32 is the working precision; float64 exists for gradient verification.
There is no general broadcasting: elementwise ops require identical shapes,
and the only broadcasts are the dedicated per-axis bias/scale ops.

The tape is process-global, so a recording forward/backward pass is confined
to one thread. Evaluation under ``no_grad`` is side-effect free and may run
concurrently on separate model instances.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DTYPE = np.float32


class AutogradError(RuntimeError):
    pass


class ShapeError(ValueError):
    pass


class TapeNode:
    """One recorded operation: output tensor plus a pull-back closure."""

    __slots__ = ("op", "out", "inputs", "backward_fn")

    def __init__(self, op, out, inputs, backward_fn):
        self.op = op
        self.out = out
        self.inputs = inputs
        self.backward_fn = backward_fn


class GradientTape:
    """Append-only operation record. Reverse order of ``nodes`` is a valid
    topological order because every input of a node was appended earlier."""

    def __init__(self):
        self.nodes: list[TapeNode] = []

    def append(self, node: TapeNode) -> int:
        self.nodes.append(node)
        return len(self.nodes) - 1

    def clear(self):
        self.nodes = []


_TAPE = GradientTape()
_GRAD_ENABLED = True


def active_tape() -> GradientTape:
    return _TAPE


class no_grad:
    """Context manager disabling tape recording (evaluation mode)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "tape_id", "name")

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None and not isinstance(data, (np.ndarray, np.generic)):
            dtype = DEFAULT_DTYPE
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.tape_id = None
        self.name = name

    # ------------------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, g: np.ndarray):
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad = self.grad + g

    def __repr__(self):
        head = f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}"
        if self.requires_grad:
            head += ", requires_grad=True"
        return head + ")"

    # operator sugar ----------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return add_scalar(self, float(other))

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return mul_scalar(self, float(other))

    __rmul__ = __mul__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return sub(self, other)
        return add_scalar(self, -float(other))

    def __rsub__(self, other):
        return rsub_scalar(self, float(other))

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return div(self, other)
        return mul_scalar(self, 1.0 / float(other))

    def __neg__(self):
        return mul_scalar(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, a, b):
        return transpose(self, a, b)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)


def tensor(data, requires_grad=False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def _record(op, out, inputs, backward_fn):
    """Register an op result on the active tape when gradients are on."""
    if _GRAD_ENABLED and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.tape_id = _TAPE.append(TapeNode(op, out, inputs, backward_fn))
    return out


def backward(loss: Tensor):
    """Populate ``grad`` on every tensor reachable from ``loss``.

    ``loss`` must be a scalar (one element). The tape is consumed: a second
    call without a fresh forward pass raises.
    """
    if loss.size != 1:
        raise AutogradError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not _TAPE.nodes:
        raise AutogradError("backward called on an empty tape (re-run the forward pass)")
    loss.grad = np.ones_like(loss.data)
    for node in reversed(_TAPE.nodes):
        g = node.out.grad
        if g is None:
            continue
        node.backward_fn(g)
    _TAPE.clear()


# ----------------------------------------------------------------------
# elementwise / shape primitives
# ----------------------------------------------------------------------

def reshape(t: Tensor, new_shape) -> Tensor:
    new_shape = tuple(int(d) for d in new_shape)
    if int(np.prod(new_shape)) != t.size:
        raise ShapeError(f"cannot reshape {t.shape} ({t.size} elements) to {new_shape}")
    out = Tensor(t.data.reshape(new_shape))
    old_shape = t.shape

    def bw(g):
        if t.requires_grad:
            t.accumulate_grad(g.reshape(old_shape))

    return _record("reshape", out, (t,), bw)


def transpose(t: Tensor, dim_a: int, dim_b: int) -> Tensor:
    nd = t.ndim
    if not (-nd <= dim_a < nd and -nd <= dim_b < nd):
        raise ShapeError(f"transpose axes ({dim_a},{dim_b}) out of range for rank {nd}")
    out = Tensor(np.swapaxes(t.data, dim_a, dim_b).copy())

    def bw(g):
        if t.requires_grad:
            t.accumulate_grad(np.swapaxes(g, dim_a, dim_b))

    return _record("transpose", out, (t,), bw)


def _check_same_shape(op, a, b):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("add", a, b)
    out = Tensor(a.data + b.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g)

    return _record("add", out, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("sub", a, b)
    out = Tensor(a.data - b.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(-g)

    return _record("sub", out, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("mul", a, b)
    out = Tensor(a.data * b.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g * b.data)
        if b.requires_grad:
            b.accumulate_grad(g * a.data)

    return _record("mul", out, (a, b), bw)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("div", a, b)
    out = Tensor(a.data / b.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g / b.data)
        if b.requires_grad:
            b.accumulate_grad(-g * a.data / (b.data * b.data))

    return _record("div", out, (a, b), bw)


def add_scalar(t: Tensor, s: float) -> Tensor:
    out = Tensor(t.data + t.data.dtype.type(s))

    def bw(g):
        if t.requires_grad:
            t.accumulate_grad(g)

    return _record("add_scalar", out, (t,), bw)


def mul_scalar(t: Tensor, s: float) -> Tensor:
    out = Tensor(t.data * t.data.dtype.type(s))

    def bw(g):
        if t.requires_grad:
            t.accumulate_grad(g * np.asarray(s, dtype=g.dtype))

    return _record("mul_scalar", out, (t,), bw)


def rsub_scalar(t: Tensor, s: float) -> Tensor:
    """s - t, elementwise."""
    out = Tensor(t.data.dtype.type(s) - t.data)

    def bw(g):
        if t.requires_grad:
            t.accumulate_grad(-g)

    return _record("rsub_scalar", out, (t,), bw)


def add_bias(x: Tensor, bias: Tensor, axis: int) -> Tensor:
    """x + bias broadcast along ``axis`` (the single permitted broadcast)."""
    axis = axis % x.ndim
    if bias.ndim != 1 or bias.shape[0] != x.shape[axis]:
        raise ShapeError(f"add_bias: bias {bias.shape} does not fit axis {axis} of {x.shape}")
    view = [1] * x.ndim
    view[axis] = bias.shape[0]
    out = Tensor(x.data + bias.data.reshape(view))
    reduce_axes = tuple(i for i in range(x.ndim) if i != axis)

    def bw(g):
        if x.requires_grad:
            x.accumulate_grad(g)
        if bias.requires_grad:
            bias.accumulate_grad(g.sum(axis=reduce_axes))

    return _record("add_bias", out, (x, bias), bw)


def mul_scale(x: Tensor, scale: Tensor, axis: int) -> Tensor:
    """x * scale broadcast along ``axis`` (companion of add_bias)."""
    axis = axis % x.ndim
    if scale.ndim != 1 or scale.shape[0] != x.shape[axis]:
        raise ShapeError(f"mul_scale: scale {scale.shape} does not fit axis {axis} of {x.shape}")
    view = [1] * x.ndim
    view[axis] = scale.shape[0]
    out = Tensor(x.data * scale.data.reshape(view))
    reduce_axes = tuple(i for i in range(x.ndim) if i != axis)

    def bw(g):
        if x.requires_grad:
            x.accumulate_grad(g * scale.data.reshape(view))
        if scale.requires_grad:
            scale.accumulate_grad((g * x.data).sum(axis=reduce_axes))

    return _record("mul_scale", out, (x, scale), bw)


def tsum(t: Tensor, axis=None, keepdims=False) -> Tensor:
    out = Tensor(t.data.sum(axis=axis, keepdims=keepdims))
    in_shape = t.shape

    def bw(g):
        if not t.requires_grad:
            return
        if axis is None:
            t.accumulate_grad(np.broadcast_to(g, in_shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            t.accumulate_grad(np.broadcast_to(gg, in_shape).copy())

    return _record("sum", out, (t,), bw)


def tmean(t: Tensor, axis=None, keepdims=False) -> Tensor:
    n = t.size if axis is None else t.shape[axis]
    return mul_scalar(tsum(t, axis=axis, keepdims=keepdims), 1.0 / n)


def log(t: Tensor) -> Tensor:
    out = Tensor(np.log(t.data))

    def bw(g):
        if t.requires_grad:
            t.accumulate_grad(g / t.data)

    return _record("log", out, (t,), bw)


def clamp(t: Tensor, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient is zero outside the open interval."""
    out = Tensor(np.clip(t.data, lo, hi))
    mask = ((t.data > lo) & (t.data < hi)).astype(t.data.dtype)

    def bw(g):
        if t.requires_grad:
            t.accumulate_grad(g * mask)

    return _record("clamp", out, (t,), bw)


def sigmoid(t: Tensor) -> Tensor:
    x = t.data
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    out = Tensor(y)

    def bw(g):
        if t.requires_grad:
            t.accumulate_grad(g * y * (1.0 - y))

    return _record("sigmoid", out, (t,), bw)


def leaky_relu(t: Tensor, slope: float = 0.01) -> Tensor:
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky_relu slope must lie in (0,1), got {slope}")
    mask = t.data >= 0
    out = Tensor(np.where(mask, t.data, t.data * t.data.dtype.type(slope)))

    def bw(g):
        if t.requires_grad:
            t.accumulate_grad(np.where(mask, g, g * g.dtype.type(slope)))

    return _record("leaky_relu", out, (t,), bw)


def concat(tensors, axis: int) -> Tensor:
    tensors = list(tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t.accumulate_grad(g[tuple(idx)])

    return _record("concat", out, tuple(tensors), bw)


# ----------------------------------------------------------------------
# contractions
# ----------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """a @ b with a of shape [..., M, K] and b of shape [K, N].

    Leading batch axes live on ``a`` only; gradients for ``b`` are summed
    over them.
    """
    if b.ndim != 2:
        raise ShapeError(f"matmul: right operand must be rank 2, got {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate_grad(g @ b.data.T)
        if b.requires_grad:
            ga = a.data.reshape(-1, a.shape[-1])
            gg = g.reshape(-1, g.shape[-1])
            b.accumulate_grad(ga.T @ gg)

    return _record("matmul", out, (a, b), bw)


# ----------------------------------------------------------------------
# spatial primitives
# ----------------------------------------------------------------------

def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Stride-1 same-padding cross-correlation.

    x: [B, C_in, H, W]; weight: [C_out, C_in, k, k] with k odd (1 or 3 in this
    artifact); bias: [C_out] or None. Output keeps H and W.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d: need 4-D input/weight, got {x.shape}, {weight.shape}")
    B, Cin, H, W = x.shape
    Cout, Cin_w, k, k2 = weight.shape
    if k != k2 or k % 2 == 0:
        raise ShapeError(f"conv2d: kernel must be square and odd, got {k}x{k2}")
    if Cin != Cin_w:
        raise ShapeError(f"conv2d: input has {Cin} channels, weight expects {Cin_w}")
    pad = (k - 1) // 2

    if k == 1:
        w2 = weight.data.reshape(Cout, Cin)
        y = np.einsum("oc,bchw->bohw", w2, x.data, optimize=True)
        cols = None
    else:
        xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        # cols: [B, H, W, C_in, k, k]
        cols = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
        cols = cols.transpose(0, 2, 3, 1, 4, 5)
        y = np.einsum("bhwcij,ocij->bohw", cols, weight.data, optimize=True)
    if bias is not None:
        y = y + bias.data.reshape(1, Cout, 1, 1)
    y = np.ascontiguousarray(y, dtype=x.data.dtype)
    out = Tensor(y)

    def bw(g):
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(g.sum(axis=(0, 2, 3)))
        if k == 1:
            if weight.requires_grad:
                gw = np.einsum("bohw,bchw->oc", g, x.data, optimize=True)
                weight.accumulate_grad(gw.reshape(weight.shape))
            if x.requires_grad:
                gx = np.einsum("oc,bohw->bchw", weight.data.reshape(Cout, Cin), g,
                               optimize=True)
                x.accumulate_grad(np.ascontiguousarray(gx, dtype=x.data.dtype))
        else:
            if weight.requires_grad:
                gw = np.einsum("bhwcij,bohw->ocij", cols, g, optimize=True)
                weight.accumulate_grad(gw.astype(weight.data.dtype, copy=False))
            if x.requires_grad:
                gp = np.pad(g, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
                gcols = np.lib.stride_tricks.sliding_window_view(gp, (k, k), axis=(2, 3))
                gcols = gcols.transpose(0, 2, 3, 1, 4, 5)
                wflip = weight.data[:, :, ::-1, ::-1]
                gx = np.einsum("bhwoij,ocij->bchw", gcols, wflip, optimize=True)
                x.accumulate_grad(np.ascontiguousarray(gx, dtype=x.data.dtype))

    return _record("conv2d", out, (x, weight) + (() if bias is None else (bias,)), bw)


def max_pool2d(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2. Requires even H and W; gradient is
    routed to the first-found maximum of each window."""
    if x.ndim != 4:
        raise ShapeError(f"max_pool2d: need 4-D input, got {x.shape}")
    B, C, H, W = x.shape
    if H % 2 or W % 2:
        raise ShapeError(f"max_pool2d: spatial dims must be even, got {H}x{W}")
    win = x.data.reshape(B, C, H // 2, 2, W // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(B, C, H // 2, W // 2, 4)
    arg = win.argmax(axis=-1)
    y = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    out = Tensor(np.ascontiguousarray(y))

    def bw(g):
        if not x.requires_grad:
            return
        gwin = np.zeros_like(win)
        np.put_along_axis(gwin, arg[..., None], g[..., None], axis=-1)
        gx = gwin.reshape(B, C, H // 2, W // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        x.accumulate_grad(np.ascontiguousarray(gx.reshape(B, C, H, W)))

    return _record("max_pool2d", out, (x,), bw)


def _up2_indices(n: int):
    # align_corners=False: src = (dst + 0.5)/2 - 0.5
    src = (np.arange(2 * n) + 0.5) / 2.0 - 0.5
    i0 = np.floor(src).astype(np.int64)
    frac = src - i0
    i0c = np.clip(i0, 0, n - 1)
    i1c = np.clip(i0 + 1, 0, n - 1)
    return i0c, i1c, frac


def _up2_transpose(g: np.ndarray, axis: int) -> np.ndarray:
    """Exact transpose of the x2 bilinear blend along one axis.

    Output index 2k draws (0.25, 0.75) from sources (k-1, k) and 2k+1 draws
    (0.75, 0.25) from (k, k+1), edges clamped; the adjoint scatters the same
    weights back, expressed with slices instead of index arrays.
    """
    g = np.moveaxis(g, axis, 0)
    ge = g[0::2]
    go = g[1::2]
    n = ge.shape[0]
    gx = 0.75 * (ge + go)
    gx[: n - 1] += 0.25 * ge[1:]
    gx[0] += 0.25 * ge[0]
    gx[1:] += 0.25 * go[: n - 1]
    gx[n - 1] += 0.25 * go[n - 1]
    return np.moveaxis(gx, 0, axis)


def upsample_bilinear2x(x: Tensor) -> Tensor:
    """Doubles H and W with bilinear interpolation (align_corners=False)."""
    if x.ndim != 4:
        raise ShapeError(f"upsample_bilinear2x: need 4-D input, got {x.shape}")
    B, C, H, W = x.shape
    if H < 1 or W < 1:
        raise ShapeError("upsample_bilinear2x: empty spatial dims")
    r0, r1, rf = _up2_indices(H)
    c0, c1, cf = _up2_indices(W)
    dt = x.data.dtype
    rf = rf.astype(dt)
    cf = cf.astype(dt)
    # rows then columns (separable)
    rows = x.data[:, :, r0, :] * (1 - rf)[None, None, :, None] \
        + x.data[:, :, r1, :] * rf[None, None, :, None]
    y = rows[:, :, :, c0] * (1 - cf)[None, None, None, :] \
        + rows[:, :, :, c1] * cf[None, None, None, :]
    out = Tensor(np.ascontiguousarray(y))

    def bw(g):
        if not x.requires_grad:
            return
        grows = _up2_transpose(g, axis=3)
        x.accumulate_grad(_up2_transpose(grows, axis=2))

    return _record("upsample_bilinear2x", out, (x,), bw)


# ----------------------------------------------------------------------
# normalization primitives
# ----------------------------------------------------------------------

def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, axis: int, eps: float = 1e-5) -> Tensor:
    """Standardize over one axis, then apply per-channel affine.

    Works for [B,N,C] with axis=-1 and [B,C,H,W] with axis=1 (per-position
    channel normalization in both layouts).
    """
    axis = axis % x.ndim
    C = x.shape[axis]
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError(f"layer_norm: affine shape {gamma.shape} does not match axis size {C}")
    mu = x.data.mean(axis=axis, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    view = [1] * x.ndim
    view[axis] = C
    y = xhat * gamma.data.reshape(view) + beta.data.reshape(view)
    out = Tensor(y.astype(x.data.dtype, copy=False))
    reduce_axes = tuple(i for i in range(x.ndim) if i != axis)

    def bw(g):
        if beta.requires_grad:
            beta.accumulate_grad(g.sum(axis=reduce_axes))
        if gamma.requires_grad:
            gamma.accumulate_grad((g * xhat).sum(axis=reduce_axes))
        if x.requires_grad:
            gh = g * gamma.data.reshape(view)
            m1 = gh.mean(axis=axis, keepdims=True)
            m2 = (gh * xhat).mean(axis=axis, keepdims=True)
            gx = inv * (gh - m1 - xhat * m2)
            x.accumulate_grad(gx.astype(x.data.dtype, copy=False))

    return _record("layer_norm", out, (x, gamma, beta), bw)


def batch_norm_train(x: Tensor, gamma: Tensor, beta: Tensor, axis: int,
                     eps: float = 1e-5):
    """Training-mode batch norm over all axes except ``axis``.

    Returns (out, batch_mean, batch_var) with the statistics as plain numpy
    arrays (biased variance) for the caller's running-average update.
    """
    axis = axis % x.ndim
    C = x.shape[axis]
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError(f"batch_norm: affine shape {gamma.shape} does not match axis size {C}")
    reduce_axes = tuple(i for i in range(x.ndim) if i != axis)
    n = x.size // C
    mu = x.data.mean(axis=reduce_axes, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=reduce_axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    view = [1] * x.ndim
    view[axis] = C
    y = xhat * gamma.data.reshape(view) + beta.data.reshape(view)
    out = Tensor(y.astype(x.data.dtype, copy=False))

    def bw(g):
        if beta.requires_grad:
            beta.accumulate_grad(g.sum(axis=reduce_axes))
        if gamma.requires_grad:
            gamma.accumulate_grad((g * xhat).sum(axis=reduce_axes))
        if x.requires_grad:
            gh = g * gamma.data.reshape(view)
            m1 = gh.mean(axis=reduce_axes, keepdims=True)
            m2 = (gh * xhat).mean(axis=reduce_axes, keepdims=True)
            gx = inv * (gh - m1 - xhat * m2)
            x.accumulate_grad(gx.astype(x.data.dtype, copy=False))

    out = _record("batch_norm_train", out, (x, gamma, beta), bw)
    return out, mu.reshape(C), var.reshape(C), n


def batch_norm_eval(x: Tensor, gamma: Tensor, beta: Tensor,
                    running_mean: np.ndarray, running_var: np.ndarray,
                    axis: int, eps: float = 1e-5) -> Tensor:
    """Inference-mode batch norm: depends only on the running statistics."""
    axis = axis % x.ndim
    inv = (1.0 / np.sqrt(running_var + eps)).astype(x.data.dtype)
    scale = mul(gamma, Tensor(inv))
    shift = sub(beta, mul(scale, Tensor(running_mean.astype(x.data.dtype))))
    return add_bias(mul_scale(x, scale, axis), shift, axis)
