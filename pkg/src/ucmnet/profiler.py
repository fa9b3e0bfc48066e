"""Exact parameter, MAC, and memory accounting for the built models.

MACs are analytic: conv = pos * C_in * C_out * k^2, linear = pos * C_in *
C_out, where pos is the number of output positions. Normalizations,
activations, pooling, upsampling, and residual adds are tallied separately
as elementwise op counts and stay out of the headline GFLOPs figure, which
is reported under both the 1-FLOP-per-MAC and 2-FLOPs-per-MAC conventions.

The memory estimate is parameter bytes plus peak live activation bytes under
sequential execution with greedy buffer release (buffers freed at last use).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .model import UcmNet, UNetVariant


@dataclass
class CostEntry:
    name: str
    params: int
    macs: int
    elementwise: int = 0


@dataclass
class CostReport:
    input_shape: tuple
    per_layer: list = field(default_factory=list)

    @property
    def total_params(self):
        return sum(e.params for e in self.per_layer)

    @property
    def total_macs(self):
        return sum(e.macs for e in self.per_layer)

    @property
    def total_elementwise(self):
        return sum(e.elementwise for e in self.per_layer)

    @property
    def gflops_mac(self):
        return self.total_macs / 1e9

    @property
    def gflops_2mac(self):
        return 2 * self.total_macs / 1e9

    @property
    def param_bytes(self):
        return 4 * self.total_params

    peak_activation_bytes: int = 0

    @property
    def memory_bytes(self):
        return self.param_bytes + self.peak_activation_bytes

    def to_text(self):
        lines = [f"{'layer':<24}{'params':>10}{'macs':>14}{'elementwise':>14}"]
        for e in self.per_layer:
            lines.append(f"{e.name:<24}{e.params:>10}{e.macs:>14}{e.elementwise:>14}")
        lines.append("-" * 62)
        lines.append(f"{'total':<24}{self.total_params:>10}{self.total_macs:>14}"
                     f"{self.total_elementwise:>14}")
        lines.append(f"gflops (1 FLOP/MAC):  {self.gflops_mac:.4f}")
        lines.append(f"gflops (2 FLOPs/MAC): {self.gflops_2mac:.4f}")
        lines.append(f"param bytes:          {self.param_bytes}")
        lines.append(f"peak activation bytes:{self.peak_activation_bytes:>12}")
        lines.append(f"memory estimate bytes:{self.memory_bytes:>12}")
        return "\n".join(lines)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["layer", "params", "macs", "elementwise"])
            for e in self.per_layer:
                w.writerow([e.name, e.params, e.macs, e.elementwise])
            w.writerow(["total", self.total_params, self.total_macs,
                        self.total_elementwise])


def count_params(model) -> int:
    """Learnable tensors only; running statistics excluded."""
    return sum(p.size for p in model.parameters())


class _MemSim:
    """Greedy live-buffer tracker (bytes, float32)."""

    def __init__(self):
        self.live = {}
        self.cur = 0
        self.peak = 0

    def alloc(self, key, elems):
        nbytes = 4 * elems
        self.live[key] = nbytes
        self.cur += nbytes
        self.peak = max(self.peak, self.cur)

    def free(self, key):
        self.cur -= self.live.pop(key)

    def replace(self, key, elems):
        # allocate the new buffer before the old input is released
        self.alloc(key + "'", elems)
        if key in self.live:
            self.free(key)
        self.live[key] = self.live.pop(key + "'")


def _conv_entry(name, conv, pos):
    k = conv.kernel_size
    params = conv.weight.size + (conv.bias.size if conv.bias is not None else 0)
    return CostEntry(name, params, pos * conv.in_channels * conv.out_channels * k * k)


def _linear_entry(name, lin, pos):
    params = lin.weight.size + (lin.bias.size if lin.bias is not None else 0)
    return CostEntry(name, params, pos * lin.in_features * lin.out_features)


def _norm_entry(name, norm, elems):
    return CostEntry(name, norm.gamma.size + norm.beta.size, 0, elems)


def _ucm_entries(prefix, block, h, w, mem):
    c = block.channels
    n = h * w
    entries = [
        _norm_entry(f"{prefix}.ln1", block.ln1, n * c),
        _linear_entry(f"{prefix}.fc1", block.fc1, n),
        _norm_entry(f"{prefix}.ln2", block.ln2, n * c),
        _conv_entry(f"{prefix}.conv1", block.conv1, n),
        CostEntry(f"{prefix}.act", 0, 0, n * c),
        _conv_entry(f"{prefix}.conv2", block.conv2, n),
        _norm_entry(f"{prefix}.bn", block.bn, n * c),
        _linear_entry(f"{prefix}.fc2", block.fc2, n),
        _norm_entry(f"{prefix}.ln3", block.ln3, n * c),
        _conv_entry(f"{prefix}.conv3", block.conv3, n),
        CostEntry(f"{prefix}.residual", 0, 0, n * c),
    ]
    # residual copy held across the block, plus one rolling work buffer
    mem.alloc(f"{prefix}.x1", n * c)
    mem.replace("x", n * c)
    mem.free(f"{prefix}.x1")
    return entries


def cost_report(model, input_shape=(1, 3, 256, 256)) -> CostReport:
    b, cin, h, w = input_shape
    if b != 1:
        raise ValueError("cost accounting is per sample; use batch 1")
    if isinstance(model, UcmNet):
        report = _cost_ucmnet(model, h, w)
    elif isinstance(model, UNetVariant):
        report = _cost_unet_variant(model, h, w)
    else:
        raise TypeError(f"unsupported model kind {type(model).__name__}")
    report.input_shape = tuple(input_shape)
    assert report.total_params == count_params(model), \
        "cost walk out of sync with stored tensors"
    return report


def _cost_ucmnet(model: UcmNet, h, w) -> CostReport:
    ch = model.config.stage_channels
    cin = model.config.input_channels
    entries = []
    mem = _MemSim()
    mem.alloc("x", cin * h * w)

    entries.append(_norm_entry("input_bn", model.input_bn, cin * h * w))
    mem.replace("x", cin * h * w)

    res = [(h >> i, w >> i) for i in range(6)]
    for i in range(6):
        hi, wi = res[i]
        conv = getattr(model, f"enc{i+1}").conv
        entries.append(_conv_entry(f"enc{i+1}.conv", conv, hi * wi))
        entries.append(CostEntry(f"enc{i+1}.act", 0, 0, ch[i] * hi * wi))
        mem.replace("x", ch[i] * hi * wi)
        if i in model.UCM_STAGES:
            entries.extend(_ucm_entries(f"ucm{i+1}", getattr(model, f"ucm{i+1}"),
                                        hi, wi, mem))
        if i < 5:
            mem.alloc(f"skip{i}", ch[i] * hi * wi)
            entries.append(CostEntry(f"pool{i+1}", 0, 0, ch[i] * hi * wi // 4))
            mem.replace("x", ch[i] * hi * wi // 4)

    for i in reversed(range(5)):
        hi, wi = res[i]
        reduce = getattr(model, f"reduce{i+1}")
        if i in model.REDUCE_FIRST_LEVELS:
            red_pos = (hi // 2) * (wi // 2)
            entries.append(_conv_entry(f"reduce{i+1}", reduce, red_pos))
            mem.replace("x", ch[i] * red_pos)
            entries.append(CostEntry(f"up{i+1}", 0, 0, ch[i] * hi * wi))
            mem.replace("x", ch[i] * hi * wi)
        else:
            entries.append(CostEntry(f"up{i+1}", 0, 0, ch[i + 1] * hi * wi))
            mem.replace("x", ch[i + 1] * hi * wi)
            entries.append(_conv_entry(f"reduce{i+1}", reduce, hi * wi))
            mem.replace("x", ch[i] * hi * wi)
        entries.append(CostEntry(f"skip_add{i+1}", 0, 0, ch[i] * hi * wi))
        mem.replace("x", ch[i] * hi * wi)
        mem.free(f"skip{i}")
        entries.append(_conv_entry(f"dec{i+1}.conv", getattr(model, f"dec{i+1}").conv,
                                   hi * wi))
        entries.append(CostEntry(f"dec{i+1}.act", 0, 0, ch[i] * hi * wi))
        mem.replace("x", ch[i] * hi * wi)
        entries.append(_conv_entry(f"head{i+1}", getattr(model, f"head{i+1}"),
                                   hi * wi))
        mem.alloc(f"logits{i+1}", hi * wi)

    entries.append(_conv_entry("out_head", model.out_head, h * w))
    mem.alloc("out", h * w)
    return CostReport(input_shape=(1, cin, h, w), per_layer=entries,
                      peak_activation_bytes=mem.peak)


def _cost_unet_variant(model: UNetVariant, h, w) -> CostReport:
    ch = model.config.stage_channels
    cin = model.config.input_channels
    entries = []
    mem = _MemSim()
    mem.alloc("x", cin * h * w)
    res = [(h >> i, w >> i) for i in range(6)]

    for i in range(6):
        hi, wi = res[i]
        for tag in ("a", "b"):
            conv = getattr(model, f"enc{i+1}{tag}").conv
            entries.append(_conv_entry(f"enc{i+1}{tag}.conv", conv, hi * wi))
            entries.append(CostEntry(f"enc{i+1}{tag}.act", 0, 0, ch[i] * hi * wi))
            mem.replace("x", ch[i] * hi * wi)
        if i < 5:
            mem.alloc(f"skip{i}", ch[i] * hi * wi)
            entries.append(CostEntry(f"pool{i+1}", 0, 0, ch[i] * hi * wi // 4))
            mem.replace("x", ch[i] * hi * wi // 4)

    for i in reversed(range(5)):
        hi, wi = res[i]
        red = getattr(model, f"reduce{i+1}", None)
        width = ch[i + 1]
        if red is not None:
            entries.append(_conv_entry(f"reduce{i+1}", red, (hi // 2) * (wi // 2)))
            width = ch[i]
            mem.replace("x", width * (hi // 2) * (wi // 2))
        entries.append(CostEntry(f"up{i+1}", 0, 0, width * hi * wi))
        mem.replace("x", width * hi * wi)
        entries.append(CostEntry(f"concat{i+1}", 0, 0, (width + ch[i]) * hi * wi))
        mem.replace("x", (width + ch[i]) * hi * wi)
        mem.free(f"skip{i}")
        for tag in ("a", "b"):
            conv = getattr(model, f"dec{i+1}{tag}").conv
            entries.append(_conv_entry(f"dec{i+1}{tag}.conv", conv, hi * wi))
            entries.append(CostEntry(f"dec{i+1}{tag}.act", 0, 0, ch[i] * hi * wi))
            mem.replace("x", ch[i] * hi * wi)

    entries.append(_conv_entry("out_head", model.out_head, h * w))
    mem.alloc("out", h * w)
    return CostReport(input_shape=(1, cin, h, w), per_layer=entries,
                      peak_activation_bytes=mem.peak)


def count_flops(model, input_shape=(1, 3, 256, 256)) -> CostReport:
    return cost_report(model, input_shape)


def memory_estimate(model, input_shape=(1, 3, 256, 256)) -> int:
    return cost_report(model, input_shape).memory_bytes
