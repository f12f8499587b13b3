"""Infrared and visible image fusion through two-scale decomposition.

Each source image splits into a base part and a detail content by a
regularized least-squares filter.  Base parts fuse by weighted averaging;
detail contents fuse through weight maps derived from deep features of a
VGG-19 prefix, one candidate per feature tap, combined by per-pixel maximum.
The fused image is the sum of the fused parts.  Quality metrics and a batch
CLI round out the toolkit.
"""

from .twoscale import DEFAULT_LAMBDA, decompose, solve_base
from .fusion import (
    FusionConfig,
    activity_map,
    block_average,
    fuse_base,
    fuse_detail,
    fuse_detail_layer,
    fuse_pair,
    max_select,
    reconstruct,
    softmax_weights,
    upsample_weights,
)
from .io import crop, pad_reflect, pad_to_multiple, quantize, read_image, write_image
from .metrics import evaluate_pair, fmi, nabf, ssim, ssim_a
from .vggfeat import (
    ConvLayer,
    IncompatibleModelError,
    VggBackbone,
    WeightCorruptionError,
    WeightFileError,
    WeightFormatError,
    extract_features,
    layer_checksum,
    load_backbone,
    random_backbone,
    write_backbone,
)

__version__ = "1.0.0"

__all__ = [
    "DEFAULT_LAMBDA",
    "decompose",
    "solve_base",
    "FusionConfig",
    "activity_map",
    "block_average",
    "fuse_base",
    "fuse_detail",
    "fuse_detail_layer",
    "fuse_pair",
    "max_select",
    "reconstruct",
    "softmax_weights",
    "upsample_weights",
    "crop",
    "pad_reflect",
    "pad_to_multiple",
    "quantize",
    "read_image",
    "write_image",
    "evaluate_pair",
    "fmi",
    "nabf",
    "ssim",
    "ssim_a",
    "ConvLayer",
    "IncompatibleModelError",
    "VggBackbone",
    "WeightCorruptionError",
    "WeightFileError",
    "WeightFormatError",
    "extract_features",
    "layer_checksum",
    "load_backbone",
    "random_backbone",
    "write_backbone",
    "__version__",
]
