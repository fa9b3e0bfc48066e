"""The six-stage encoder-decoder, its hybrid block, and the ablation variants.

Stage plan (channels default [8, 16, 24, 32, 48, 64], input 256x256):

  encoder   conv block (3x3 at stage 1, 1x1 after) -> hybrid block at the two
            deepest stages -> 2x2 max-pool between stages
  decoder   five stages; each upsamples 2x, projects the incoming width down
            with a 1x1 conv, adds the same-resolution encoder skip, then runs
            a 1x1 conv. The two highest-resolution stages project before
            upsampling so the projection runs at a quarter of the cost.
  heads     one 1x1 logit head per decoder stage (deep supervision) plus the
            full-resolution output head.

A learned BatchNorm over the RGB input replaces dataset mean/std statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import tensor as T
from .layers import (BatchNorm, Conv2d, LayerNorm, LeakyReLU, Linear, Module,
                     bilinear_upsample2x, init_module, max_pool2d)

VARIANT_A = "variant_a_doubleconv"
VARIANT_B = "variant_b_conv1x1"
VARIANT_C = "variant_c_ucm"


@dataclass
class NetworkConfig:
    stage_channels: list = field(default_factory=lambda: [8, 16, 24, 32, 48, 64])
    input_channels: int = 3
    input_size: tuple = (256, 256)
    block_kind: str = VARIANT_C
    deep_supervision: bool = True
    leaky_slope: float = 0.01
    norm_eps: float = 1e-5
    bn_momentum: float = 0.1

    def validate(self):
        if len(self.stage_channels) != 6:
            raise ValueError(f"exactly 6 stages required, got {len(self.stage_channels)}")
        h, w = self.input_size
        if h % 32 or w % 32:
            raise ValueError(f"input size must be divisible by 32, got {h}x{w}")
        if self.block_kind not in (VARIANT_A, VARIANT_B, VARIANT_C):
            raise ValueError(f"unknown block_kind {self.block_kind!r}")
        return self


class UcmBlock(Module):
    """Hybrid linear/conv block with a residual over the flattened layout.

    Input [B,C,H,W], output [B,H*W,C]:

        X  = flatten+transpose(input)          # [B,N,C]
        X1 = X
        X  = fc1(ln1(X)); back to [B,C,H,W]
        X  = conv1(ln2(X)); X = conv2(leaky(X)); to [B,N,C]
        X  = fc2(bn(X)); back to [B,C,H,W]
        X  = conv3(ln3(X)); to [B,N,C]
        out = X + X1

    The 1x1 convs carry no bias (two of the three feed a normalization);
    the linear layers keep theirs.
    """

    def __init__(self, channels, leaky_slope=0.01, eps=1e-5, momentum=0.1):
        super().__init__()
        self.channels = channels
        self.ln1 = LayerNorm(channels, eps)
        self.fc1 = Linear(channels, channels)
        self.ln2 = LayerNorm(channels, eps)
        self.conv1 = Conv2d(channels, channels, 1, bias=False)
        self.conv2 = Conv2d(channels, channels, 1, bias=False)
        self.bn = BatchNorm(channels, eps, momentum)
        self.fc2 = Linear(channels, channels)
        self.ln3 = LayerNorm(channels, eps)
        self.conv3 = Conv2d(channels, channels, 1, bias=False)
        self.act = LeakyReLU(leaky_slope)

    def forward(self, x):
        b, c, h, w = x.shape
        if c != self.channels:
            raise T.ShapeError(f"hybrid block width {self.channels}, input has {c} channels")
        n = h * w

        def to_tokens(t):
            return T.transpose(T.reshape(t, (b, c, n)), 1, 2)

        def to_map(t):
            return T.reshape(T.transpose(t, 1, 2), (b, c, h, w))

        x = to_tokens(x)
        x1 = x
        x = self.fc1(self.ln1(x, axis=-1))
        x = to_map(x)
        x = self.conv1(self.ln2(x, axis=1))
        x = self.conv2(self.act(x))
        x = to_tokens(x)
        x = self.fc2(self.bn(x, axis=-1))
        x = to_map(x)
        x = self.conv3(self.ln3(x, axis=1))
        x = to_tokens(x)
        return T.add(x, x1)


class _ConvAct(Module):
    def __init__(self, cin, cout, k, slope, bias=True):
        super().__init__()
        self.conv = Conv2d(cin, cout, k, bias=bias)
        self.act = LeakyReLU(slope)

    def forward(self, x):
        return self.act(self.conv(x))


class UcmNet(Module):
    """Main segmentation network (``variant_c_ucm``)."""

    # decoder levels whose 1x1 projection runs before the upsample
    REDUCE_FIRST_LEVELS = (0, 1)
    # encoder stages (0-based) that carry a hybrid block
    UCM_STAGES = (4, 5)

    def __init__(self, config: NetworkConfig):
        super().__init__()
        config.validate()
        self.config = config
        ch = config.stage_channels
        s = config.leaky_slope
        eps = config.norm_eps
        mom = config.bn_momentum

        self.input_bn = BatchNorm(config.input_channels, eps, mom)
        prev = config.input_channels
        for i, c in enumerate(ch):
            setattr(self, f"enc{i+1}", _ConvAct(prev, c, 3 if i == 0 else 1, s))
            if i in self.UCM_STAGES:
                setattr(self, f"ucm{i+1}", UcmBlock(c, s, eps, mom))
            prev = c
        for i in reversed(range(5)):
            setattr(self, f"reduce{i+1}", Conv2d(ch[i + 1], ch[i], 1))
            setattr(self, f"dec{i+1}", _ConvAct(ch[i], ch[i], 1, s))
        for i in range(5):
            setattr(self, f"head{i+1}", Conv2d(ch[i], 1, 1))
        self.out_head = Conv2d(ch[0], 1, 1)

    def _run_block(self, i, x):
        x = getattr(self, f"enc{i+1}")(x)
        if i in self.UCM_STAGES:
            b, c, h, w = x.shape
            tokens = getattr(self, f"ucm{i+1}")(x)
            x = T.reshape(T.transpose(tokens, 1, 2), (b, c, h, w))
        return x

    def forward(self, x):
        """Returns (out_logits [B,1,H,W], stage_logits).

        stage_logits runs deepest-first: entry 0 sits at 1/16 input
        resolution, entry 4 at full resolution. Empty when deep supervision
        is off.
        """
        b, cin, h, w = x.shape
        if cin != self.config.input_channels:
            raise T.ShapeError(f"expected {self.config.input_channels} input channels, got {cin}")
        if h % 32 or w % 32:
            raise T.ShapeError(f"spatial dims must be divisible by 32, got {h}x{w}")

        x = self.input_bn(x, axis=1)
        skips = []
        for i in range(6):
            x = self._run_block(i, x)
            if i < 5:
                skips.append(x)
                x = max_pool2d(x)

        stage_logits = []
        for i in reversed(range(5)):
            reduce = getattr(self, f"reduce{i+1}")
            if i in self.REDUCE_FIRST_LEVELS:
                x = bilinear_upsample2x(reduce(x))
            else:
                x = reduce(bilinear_upsample2x(x))
            x = T.add(x, skips[i])
            x = getattr(self, f"dec{i+1}")(x)
            if self.config.deep_supervision:
                stage_logits.append(getattr(self, f"head{i+1}")(x))
        return self.out_head(x), stage_logits


class UNetVariant(Module):
    """Six-stage U-Net ablation body: two convs per stage, concat skips.

    ``second_kernel`` = 3 gives the double-conv variant, 1 the conv+1x1
    variant. Where the channel step across an upsample exceeds 8, a 1x1
    projection halves the width before upsampling; narrower steps feed the
    concatenation directly.
    """

    def __init__(self, config: NetworkConfig, second_kernel: int):
        super().__init__()
        config.validate()
        self.config = config
        self.second_kernel = second_kernel
        ch = config.stage_channels
        s = config.leaky_slope

        prev = config.input_channels
        for i, c in enumerate(ch):
            setattr(self, f"enc{i+1}a", _ConvAct(prev, c, 3, s))
            setattr(self, f"enc{i+1}b", _ConvAct(c, c, second_kernel, s))
            prev = c
        for i in reversed(range(5)):
            cup, c = ch[i + 1], ch[i]
            if cup - c > 8:
                setattr(self, f"reduce{i+1}", Conv2d(cup, c, 1))
                cat_in = 2 * c
            else:
                cat_in = cup + c
            setattr(self, f"dec{i+1}a", _ConvAct(cat_in, c, 3, s))
            setattr(self, f"dec{i+1}b", _ConvAct(c, c, second_kernel, s))
        self.out_head = Conv2d(ch[0], 1, 1)

    def forward(self, x):
        skips = []
        for i in range(6):
            x = getattr(self, f"enc{i+1}a")(x)
            x = getattr(self, f"enc{i+1}b")(x)
            if i < 5:
                skips.append(x)
                x = max_pool2d(x)
        for i in reversed(range(5)):
            red = getattr(self, f"reduce{i+1}", None)
            if red is not None:
                x = red(x)
            x = bilinear_upsample2x(x)
            x = T.concat([x, skips[i]], axis=1)
            x = getattr(self, f"dec{i+1}a")(x)
            x = getattr(self, f"dec{i+1}b")(x)
        return self.out_head(x), []


def build_variant(config: NetworkConfig, seed: int = 0) -> Module:
    """Construct and initialize the model named by ``config.block_kind``."""
    config.validate()
    if config.block_kind == VARIANT_C:
        model = UcmNet(config)
    elif config.block_kind == VARIANT_A:
        model = UNetVariant(config, second_kernel=3)
    else:
        model = UNetVariant(config, second_kernel=1)
    return init_module(model, seed)
