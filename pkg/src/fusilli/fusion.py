"""Base-part and detail-content fusion, and the full pipeline.

Base parts are fused by a per-pixel weighted average.  Detail contents are
fused through deep-feature weight maps: each detail image runs through the
VGG-19 prefix; at every tap the channelwise l1 norm gives an activity map,
a block average makes it tolerant to slight misregistration, a pairwise
soft-max turns the two activity maps into weight maps summing to one, and
nearest-neighbor replication brings them back to image resolution.  Each tap
yields one fused-detail candidate (weighted sum of the two details), and the
final fused detail takes the per-pixel signed maximum across candidates.
The fused image is the sum of fused base and fused detail, left unclamped
in memory; clamping happens only at 8-bit output time.

Both detail images are reflect-padded to the next multiple of 8 before
feature extraction (so the per-tap replication tiles exactly) and the fused
detail is cropped back afterward.

Everything here is a pure function; fusing distinct pairs concurrently is
safe, and a backbone can be shared across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import io as _io
from . import twoscale as _twoscale
from . import vggfeat as _vggfeat

__all__ = [
    "FusionConfig",
    "fuse_base",
    "activity_map",
    "block_average",
    "softmax_weights",
    "upsample_weights",
    "fuse_detail_layer",
    "max_select",
    "fuse_detail",
    "reconstruct",
    "fuse_pair",
]

PAD_MULTIPLE = 8


@dataclass(frozen=True)
class FusionConfig:
    """All pipeline tunables with their stock defaults.

    lam
        Regularization weight of the base/detail split.
    block_radius
        Radius r of the (2r+1)^2 activity-averaging block.
    alpha
        Base-part weights (alpha1, alpha2); 0.5/0.5 keeps common features
        while halving redundancy.
    taps
        Which feature taps contribute fused-detail candidates.
    epsilon
        Guard below which both soft-max weights fall back to 0.5.
    input_scale, input_offset
        Affine preprocessing applied to detail content before the network.
    pad_policy
        Only "reflect" is supported.
    """

    lam: float = 5.0
    block_radius: int = 1
    alpha: tuple = (0.5, 0.5)
    taps: tuple = (1, 2, 3, 4)
    epsilon: float = 1e-12
    input_scale: float = 1.0
    input_offset: float = 0.0
    pad_policy: str = "reflect"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.block_radius < 0:
            raise ValueError(f"block_radius must be >= 0, got {self.block_radius}")
        if len(self.alpha) != 2 or min(self.alpha) < 0:
            raise ValueError(f"alpha must be two nonnegative weights, got {self.alpha}")
        taps = tuple(sorted(set(int(t) for t in self.taps)))
        if not taps or any(t not in (1, 2, 3, 4) for t in taps):
            raise ValueError(f"taps must be a nonempty subset of {{1, 2, 3, 4}}, got {self.taps}")
        object.__setattr__(self, "taps", taps)
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.pad_policy != "reflect":
            raise ValueError(f"unsupported pad policy {self.pad_policy!r}")


def fuse_base(b1, b2, alpha=(0.5, 0.5)):
    """Per-pixel weighted average alpha[0]*b1 + alpha[1]*b2."""
    b1, b2 = _pair(b1, b2)
    return alpha[0] * b1 + alpha[1] * b2


def activity_map(features):
    """Channelwise l1 norm of a feature stack: C(x, y) = sum_m |phi_m(x, y)|.

    Accumulates in double precision so downstream weight normalization holds
    to 1e-9 even for 512-channel stacks.
    """
    features = np.asarray(features)
    if features.ndim != 3:
        raise ValueError(f"expected a (channels, H, W) stack, got shape {features.shape}")
    return np.abs(features).sum(axis=0, dtype=np.float64)


def block_average(scalar_map, radius):
    """Mean over the (2r+1)^2 block centered at each position.

    Windows reaching past the border take zeros and still divide by the full
    (2r+1)^2, reading the block operator literally.  r = 0 is the identity.
    """
    scalar_map = np.asarray(scalar_map, dtype=np.float64)
    radius = int(radius)
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if radius == 0:
        return scalar_map.copy()
    h, w = scalar_map.shape
    padded = np.pad(scalar_map, radius, mode="constant")
    total = np.zeros_like(scalar_map)
    for dy in range(2 * radius + 1):
        for dx in range(2 * radius + 1):
            total += padded[dy:dy + h, dx:dx + w]
    return total / float((2 * radius + 1) ** 2)


def softmax_weights(m1, m2, epsilon=1e-12):
    """Pairwise soft-max: W_k = m_k / (m1 + m2), with a 0.5/0.5 fallback.

    Where the activity sum is at or below ``epsilon`` both weights become
    0.5, keeping the maps normalized even on dead-flat regions.  Outputs sum
    to one at every pixel and lie in [0, 1].
    """
    m1, m2 = _pair(m1, m2)
    total = m1 + m2
    live = total > epsilon
    safe_total = np.where(live, total, 1.0)
    w1 = np.where(live, m1 / safe_total, 0.5)
    w2 = np.where(live, m2 / safe_total, 0.5)
    return w1, w2


def upsample_weights(scalar_map, factor):
    """Nearest-neighbor replication by an integer factor in {1, 2, 4, 8}.

    Output(x*f + p, y*f + q) = input(x, y) for p, q in {0, ..., f-1}.
    """
    if factor not in (1, 2, 4, 8):
        raise ValueError(f"factor must be one of 1, 2, 4, 8, got {factor}")
    scalar_map = np.asarray(scalar_map)
    if factor == 1:
        return scalar_map.copy()
    return np.repeat(np.repeat(scalar_map, factor, axis=0), factor, axis=1)


def fuse_detail_layer(w1, w2, d1, d2):
    """One fused-detail candidate: w1*d1 + w2*d2, all operands image-sized."""
    arrays = [np.asarray(a, dtype=np.float64) for a in (w1, w2, d1, d2)]
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"operand dimensions differ: {sorted(shapes)}")
    return arrays[0] * arrays[2] + arrays[1] * arrays[3]


def max_select(candidates):
    """Per-pixel signed maximum across candidate images."""
    if not len(candidates):
        raise ValueError("need at least one candidate")
    arrays = [np.asarray(c, dtype=np.float64) for c in candidates]
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"candidate dimensions differ: {sorted(shapes)}")
    return np.maximum.reduce(arrays)


def fuse_detail(d1, d2, backbone, config=None, intermediates=None):
    """Fuse two detail contents through per-tap deep-feature weight maps.

    Pads both details to multiples of 8 (reflect), extracts tap activations,
    builds activity -> block average -> soft-max -> replication weight maps
    per tap, forms one weighted-sum candidate per tap on the padded grid,
    takes the per-pixel maximum, and crops back to the input size.

    ``intermediates``, if given a dict, receives per-tap weight maps cropped
    to image resolution under keys ``("weights", tap)`` -> (w1, w2).
    """
    config = config or FusionConfig()
    d1, d2 = _pair(d1, d2)
    h, w = d1.shape
    d1p, pads = _io.pad_to_multiple(d1, PAD_MULTIPLE)
    d2p, _ = _io.pad_to_multiple(d2, PAD_MULTIPLE)
    feats1 = _vggfeat.extract_features(
        d1p, backbone, taps=config.taps,
        input_scale=config.input_scale, input_offset=config.input_offset)
    feats2 = _vggfeat.extract_features(
        d2p, backbone, taps=config.taps,
        input_scale=config.input_scale, input_offset=config.input_offset)
    candidates = []
    for tap in config.taps:
        a1 = block_average(activity_map(feats1[tap]), config.block_radius)
        a2 = block_average(activity_map(feats2[tap]), config.block_radius)
        w1, w2 = softmax_weights(a1, a2, config.epsilon)
        factor = 2 ** (tap - 1)
        w1 = upsample_weights(w1, factor)
        w2 = upsample_weights(w2, factor)
        if intermediates is not None:
            intermediates[("weights", tap)] = (
                _io.crop(w1, pads).copy() if any(pads) else w1.copy(),
                _io.crop(w2, pads).copy() if any(pads) else w2.copy(),
            )
        candidates.append(fuse_detail_layer(w1, w2, d1p, d2p))
    fused = max_select(candidates)
    return fused[:h, :w]


def reconstruct(fused_base, fused_detail):
    """Per-pixel sum of fused base and fused detail; no clamping here."""
    fb, fd = _pair(fused_base, fused_detail)
    return fb + fd


def fuse_pair(i1, i2, backbone, config=None, intermediates=None):
    """Full pipeline: decompose both sources, fuse parts, reconstruct.

    ``intermediates``, if given a dict, additionally receives the base parts
    and detail contents ("base_1", "detail_1", "base_2", "detail_2"), the
    fused base and detail ("fused_base", "fused_detail") and per-tap weight
    maps as documented on :func:`fuse_detail`.
    """
    i1, i2 = _pair(i1, i2)
    config = config or FusionConfig()
    b1, d1 = _twoscale.decompose(i1, config.lam)
    b2, d2 = _twoscale.decompose(i2, config.lam)
    fb = fuse_base(b1, b2, config.alpha)
    fd = fuse_detail(d1, d2, backbone, config, intermediates=intermediates)
    if intermediates is not None:
        intermediates.update(
            base_1=b1, detail_1=d1, base_2=b2, detail_2=d2,
            fused_base=fb, fused_detail=fd)
    return reconstruct(fb, fd)


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"expected 2-D images, got shapes {a.shape} and {b.shape}")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[1]}x{a.shape[0]} vs {b.shape[1]}x{b.shape[0]}")
    return a, b
