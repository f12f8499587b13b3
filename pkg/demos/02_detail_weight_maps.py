"""From deep features to per-pixel blending weights.

Detail contents carry texture and edges from both sources; the question is
whose detail to trust at each pixel.  The pipeline answers it with network
activations: run each detail through the convolutional prefix, reduce the
activation stack at each tap to an l1 activity map, smooth it with a block
average, and convert the two activity maps into convex weights with a
soft-max.  Deeper taps see larger context at coarser resolution, so their
weight maps are upsampled back to image size.

Run from the repository root:

    python3 demos/02_detail_weight_maps.py
"""

from pathlib import Path

import numpy as np

from fusilli import (
    activity_map,
    block_average,
    decompose,
    extract_features,
    io,
    pad_to_multiple,
    random_backbone,
    softmax_weights,
    upsample_weights,
)

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

# a seeded random backbone keeps the demo self-contained; export real
# weights with the vgwf-exporter companion package for production use
backbone = random_backbone(seed=7)

rs = np.random.RandomState(11)
ys, xs = np.mgrid[0:96, 0:128]

# source 1 concentrates its texture on the left half, source 2 on the right,
# so the correct weight maps are easy to eyeball
texture = 0.12 * np.sin(xs / 1.7) * np.sin(ys / 2.3)
i1 = np.clip(0.5 + texture * (xs < 64) + rs.normal(0, 0.01, xs.shape), 0, 1)
i2 = np.clip(0.5 + texture * (xs >= 64) + rs.normal(0, 0.01, xs.shape), 0, 1)

d1 = decompose(i1, 5.0)[1]
d2 = decompose(i2, 5.0)[1]

# network input dimensions must be multiples of 8 (three pooling stages)
p1, pads = pad_to_multiple(d1, 8)
p2, _ = pad_to_multiple(d2, 8)
f1 = extract_features(p1, backbone)
f2 = extract_features(p2, backbone)

h, w = d1.shape
for tap in (1, 2, 3, 4):
    a1 = block_average(activity_map(f1[tap]), radius=1)
    a2 = block_average(activity_map(f2[tap]), radius=1)
    w1, w2 = softmax_weights(a1, a2)
    factor = 2 ** (tap - 1)
    up1 = upsample_weights(w1, factor)[:h, :w]
    up2 = upsample_weights(w2, factor)[:h, :w]

    # convexity holds pixelwise by construction
    print(f"tap {tap}: {f1[tap].shape[0]:3d} channels at {f1[tap].shape[2]}x{f1[tap].shape[1]}"
          f"   max |w1 + w2 - 1| = {np.abs(up1 + up2 - 1).max():.1e}"
          f"   left-half mean w1 = {up1[:, :64].mean():.3f}")
    io.write_image(io.quantize(up1), OUT / f"weights_tap{tap}_source1.png")

print()
print("source 1 dominates where its detail is active (left), and the maps")
print("get blockier with depth as coarse weights are repeated 2^(tap-1) times.")
print("wrote", *(f"weights_tap{t}_source1.png" for t in (1, 2, 3, 4)), "to", OUT)
