"""Lightweight hybrid conv/MLP segmentation engine.

Library surface: a small autograd tensor core, the network and its ablation
variants, the group loss and evaluation metrics, a dataset pipeline, the
training recipe, a cost profiler, and a binary weight format. See README for
the command-line interface.
"""

from .tensor import Tensor, backward, no_grad, GradientTape
from .model import (NetworkConfig, UcmBlock, UcmNet, UNetVariant,
                    build_variant, VARIANT_A, VARIANT_B, VARIANT_C)

__version__ = "0.1.0"

__all__ = [
    "Tensor", "backward", "no_grad", "GradientTape",
    "NetworkConfig", "UcmBlock", "UcmNet", "UNetVariant", "build_variant",
    "VARIANT_A", "VARIANT_B", "VARIANT_C",
]
