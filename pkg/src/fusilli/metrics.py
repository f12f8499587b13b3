"""Fusion quality metrics: structural similarity, artifact rate, feature MI.

Four scores are reported per fused image.  ssim_a averages the structural
similarity of the fused image against each source.  nabf estimates the rate
of artifacts the fusion introduced: gradient structure that is stronger in
the fused image than in either source, weighted by source saliency.  fmi
measures how much feature-level information the fused image shares with the
sources, expressed as windowed normalized mutual information over a feature
transform (blockwise cosine-transform magnitudes, or one-level Haar detail
magnitudes).

All inputs are [0, 1] grayscale doubles; fused images are clamped to that
range by :func:`evaluate_pair` before scoring, since reconstruction can
overshoot, and no other renormalization is applied.  Every function here is
pure and deterministic, so corpus scoring parallelizes per pair.
"""

from __future__ import annotations

import numpy as np
import scipy.fft
from scipy import ndimage

__all__ = ["ssim", "ssim_a", "nabf", "fmi", "evaluate_pair"]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = np.array([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]])

DCT_BLOCK = 8
FMI_BINS = 16
FMI_RADIUS = 1


def ssim(a, b, dynamic_range=1.0):
    """Mean local structural similarity over all full 11x11 windows.

    Gaussian-weighted window statistics (sigma 1.5) with the usual
    stabilizers C1 = (0.01 L)^2 and C2 = (0.03 L)^2.  Only windows that fit
    entirely inside the frame contribute, so both dimensions must be at
    least 11.  Identical inputs score exactly 1.
    """
    a, b = _pair(a, b)
    h, w = a.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ValueError(f"image {w}x{h} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    c1 = (SSIM_K1 * dynamic_range) ** 2
    c2 = (SSIM_K2 * dynamic_range) ** 2
    mu_a = _gauss_valid(a)
    mu_b = _gauss_valid(b)
    saa = _gauss_valid(a * a) - mu_a * mu_a
    sbb = _gauss_valid(b * b) - mu_b * mu_b
    sab = _gauss_valid(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * sab + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (saa + sbb + c2)
    return float(np.mean(num / den))


def ssim_a(f, i1, i2):
    """Source-averaged similarity: (ssim(f, i1) + ssim(f, i2)) * 0.5."""
    return (ssim(f, i1) + ssim(f, i2)) * 0.5


def nabf(f, i1, i2,
         gamma_g=0.9994, kappa_g=-15.0, sigma_g=0.5,
         gamma_a=0.9879, kappa_a=-22.0, sigma_a=0.8):
    """Artifact rate: saliency-weighted non-preservation where fusion invents edges.

    Sobel strength and orientation are taken for the fused image and both
    sources.  Per-pixel preservation factors Q_kF combine a strength ratio
    sigmoid and an orientation agreement sigmoid; artifact locations are
    pixels whose fused gradient strictly exceeds both source gradients.  The
    score is

        sum_artifacts w * (1 - Q_1F) * (1 - Q_2F) / sum_all w

    with saliency w = max(g_1, g_2).  Flat sources (zero total saliency)
    score 0.  Self fusion scores 0 since no pixel can strictly exceed itself.
    """
    f, i1 = _pair(f, i1)
    f, i2 = _pair(f, i2)
    g_f, a_f = _sobel_polar(f)
    g_1, a_1 = _sobel_polar(i1)
    g_2, a_2 = _sobel_polar(i2)
    q_1f = _preservation(g_1, a_1, g_f, a_f, gamma_g, kappa_g, sigma_g,
                         gamma_a, kappa_a, sigma_a)
    q_2f = _preservation(g_2, a_2, g_f, a_f, gamma_g, kappa_g, sigma_g,
                         gamma_a, kappa_a, sigma_a)
    weight = np.maximum(g_1, g_2)
    total = weight.sum()
    if total <= 0.0:
        return 0.0
    artifacts = (g_f > g_1) & (g_f > g_2)
    return float((weight * artifacts * (1.0 - q_1f) * (1.0 - q_2f)).sum() / total)


def fmi(f, i1, i2, feature="dct"):
    """Feature mutual information between the fused image and its sources.

    The images pass through a feature transform, then normalized mutual
    information is averaged over all 3x3 sliding windows of the feature
    images (16-bin min-max histograms per window, NMI = 2 MI / (H1 + H2)).
    The score is the mean of the fused-vs-source NMI values for the two
    sources and lies in [0, 1]; identical images score exactly 1.
    """
    f, i1 = _pair(f, i1)
    f, i2 = _pair(f, i2)
    if feature == "dct":
        transform = _dct_feature
    elif feature == "wavelet":
        transform = _haar_feature
    else:
        raise ValueError(f"unknown feature {feature!r}, expected 'dct' or 'wavelet'")
    f_f = transform(f)
    f_1 = transform(i1)
    f_2 = transform(i2)
    side = 2 * FMI_RADIUS + 1
    if min(f_f.shape) < side:
        raise ValueError(
            f"feature image {f_f.shape[1]}x{f_f.shape[0]} is smaller than the "
            f"{side}x{side} window")
    return 0.5 * (_windowed_nmi(f_f, f_1) + _windowed_nmi(f_f, f_2))


def evaluate_pair(fused, i1, i2):
    """All four scores for one fused image, as a plain dict.

    The fused image is clamped to [0, 1] first; reconstruction may overshoot
    the source range and the metrics are defined on displayable values.
    """
    fused = np.clip(np.asarray(fused, dtype=np.float64), 0.0, 1.0)
    return {
        "fmi_dct": fmi(fused, i1, i2, feature="dct"),
        "fmi_w": fmi(fused, i1, i2, feature="wavelet"),
        "ssim_a": ssim_a(fused, i1, i2),
        "nabf": nabf(fused, i1, i2),
    }


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"expected 2-D images, got shapes {a.shape} and {b.shape}")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[1]}x{a.shape[0]} vs {b.shape[1]}x{b.shape[0]}")
    return a, b


def _gauss_kernel():
    half = (SSIM_WINDOW - 1) // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * SSIM_SIGMA ** 2))
    return k / k.sum()


_GAUSS_1D = _gauss_kernel()


def _gauss_valid(image):
    # separable correlation, then crop to windows that never touched the pad
    half = (SSIM_WINDOW - 1) // 2
    out = ndimage.correlate1d(image, _GAUSS_1D, axis=0, mode="constant")
    out = ndimage.correlate1d(out, _GAUSS_1D, axis=1, mode="constant")
    return out[half:-half, half:-half]


def _sobel_polar(image):
    gx = ndimage.correlate(image, SOBEL_X, mode="constant")
    gy = ndimage.correlate(image, SOBEL_Y, mode="constant")
    strength = np.sqrt(gx * gx + gy * gy)
    angle = np.arctan2(gy, gx)
    angle = np.where(angle > np.pi / 2, angle - np.pi, angle)
    angle = np.where(angle < -np.pi / 2, angle + np.pi, angle)
    return strength, angle


def _preservation(g_s, a_s, g_f, a_f, gamma_g, kappa_g, sigma_g,
                  gamma_a, kappa_a, sigma_a):
    hi = np.maximum(g_s, g_f)
    ratio = np.where(hi > 0.0, np.minimum(g_s, g_f) / np.where(hi > 0.0, hi, 1.0), 0.0)
    align = 1.0 - np.abs(a_s - a_f) * (2.0 / np.pi)
    q_g = gamma_g / (1.0 + np.exp(kappa_g * (ratio - sigma_g)))
    q_a = gamma_a / (1.0 + np.exp(kappa_a * (align - sigma_a)))
    return q_g * q_a


def _dct_feature(image):
    """Blockwise 8x8 cosine-transform magnitudes with the DC term zeroed.

    Edge blocks shorter than 8 in either direction get a transform of their
    actual size, so the feature image matches the input shape exactly.
    """
    h, w = image.shape
    out = np.empty((h, w), dtype=np.float64)
    for rows, bh in _block_runs(h):
        for cols, bw in _block_runs(w):
            region = image[rows, cols]
            blocks = region.reshape(region.shape[0] // bh, bh,
                                    region.shape[1] // bw, bw)
            coefs = scipy.fft.dctn(blocks, axes=(1, 3), norm="ortho")
            coefs[:, 0, :, 0] = 0.0
            out[rows, cols] = np.abs(coefs).reshape(region.shape)
    return out


def _block_runs(n):
    runs = []
    body = n - n % DCT_BLOCK
    if body:
        runs.append((slice(0, body), DCT_BLOCK))
    if n % DCT_BLOCK:
        runs.append((slice(body, n), n % DCT_BLOCK))
    return runs


def _haar_feature(image):
    """One-level Haar detail magnitude |LH| + |HL| + |HH| at half resolution.

    Odd dimensions are extended by edge replication before the split.
    """
    h, w = image.shape
    image = np.pad(image, ((0, h % 2), (0, w % 2)), mode="edge")
    inv_root2 = 1.0 / np.sqrt(2.0)
    lo = (image[0::2, :] + image[1::2, :]) * inv_root2
    hi = (image[0::2, :] - image[1::2, :]) * inv_root2
    lh = (lo[:, 0::2] - lo[:, 1::2]) * inv_root2
    hl = (hi[:, 0::2] + hi[:, 1::2]) * inv_root2
    hh = (hi[:, 0::2] - hi[:, 1::2]) * inv_root2
    return np.abs(lh) + np.abs(hl) + np.abs(hh)


def _window_codes(feature):
    """Per-window 16-level min-max quantization codes, (N, 9) int64.

    Returns the codes and a per-window constancy flag.  Constant windows
    quantize to all zeros; non-constant windows always use both extreme
    codes, so their entropy is strictly positive.
    """
    side = 2 * FMI_RADIUS + 1
    windows = np.lib.stride_tricks.sliding_window_view(feature, (side, side))
    flat = windows.reshape(-1, side * side)
    lo = flat.min(axis=1, keepdims=True)
    span = flat.max(axis=1, keepdims=True) - lo
    constant = span[:, 0] == 0.0
    scale = np.where(span > 0.0, span, 1.0)
    codes = np.floor((flat - lo) / scale * FMI_BINS).astype(np.int64)
    np.clip(codes, 0, FMI_BINS - 1, out=codes)
    codes[constant] = 0
    return codes, constant


def _code_entropy(codes):
    # H = log2(n) - mean(log2 multiplicity of each element's own value)
    counts = (codes[:, :, None] == codes[:, None, :]).sum(axis=2)
    n = codes.shape[1]
    return np.log2(float(n)) - np.log2(counts.astype(np.float64)).mean(axis=1)


def _windowed_nmi(fa, fb):
    codes_a, const_a = _window_codes(fa)
    codes_b, const_b = _window_codes(fb)
    h_a = _code_entropy(codes_a)
    h_b = _code_entropy(codes_b)
    h_ab = _code_entropy(codes_a * FMI_BINS + codes_b)
    mi = h_a + h_b - h_ab
    h_sum = h_a + h_b
    both_flat = const_a & const_b
    safe = np.where(h_sum > 0.0, h_sum, 1.0)
    nmi = np.clip(2.0 * mi / safe, 0.0, 1.0)
    nmi = np.where(both_flat, 1.0, np.where(h_sum > 0.0, nmi, 0.0))
    return float(nmi.mean())
