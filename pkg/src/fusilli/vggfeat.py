"""Minimal inference engine for the VGG-19 convolutional prefix.

Only the slice of VGG-19 that detail-content fusion needs is implemented:
conv1_1 through conv4_1 with ReLU nonlinearities and three 2x2 max-pooling
stages.  Activations are harvested at four taps (relu1_1, relu2_1, relu3_1,
relu4_1); tap ``i`` carries ``64 * 2**(i-1)`` channels at ``1 / 2**(i-1)``
of the input resolution, which is exact because callers pre-pad inputs to a
multiple of 8.

Weights come from a neutral little-endian binary container ("VGWF") so the
engine carries no deep-learning framework dependency.  Convolutions use
cross-correlation orientation (no kernel flip) to match the convention of
the model zoos the weights are exported from, with 1-pixel zero padding and
stride 1.  The forward pass runs in single precision with a fixed summation
order, so identical inputs and weights reproduce identical activations.

VGWF layout (u32 little-endian integers, f32 little-endian floats)::

    magic     4 bytes  "VGWF"
    version   u32      1
    count     u32      number of conv layers (9)
    per layer:
        name_len u32, name bytes (UTF-8, e.g. "conv1_1")
        out_ch u32, in_ch u32, kh u32 = 3, kw u32 = 3
        weights f32 * (out*in*kh*kw) in [out][in][kh][kw] order
        biases  f32 * out

Layers appear in forward order conv1_1 ... conv4_1.  Golden activation
fixtures cross-validating this engine against the exporting framework are
raw f32 tensors with a one-line ASCII header ``"C H W"``; the fixture
manifest is a flat text file of per-layer sha256 lines plus tensor paths.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ConvLayer",
    "VggBackbone",
    "FixtureManifest",
    "WeightFileError",
    "WeightFormatError",
    "WeightCorruptionError",
    "IncompatibleModelError",
    "load_backbone",
    "write_backbone",
    "random_backbone",
    "conv3x3_same",
    "relu",
    "maxpool2",
    "extract_features",
    "layer_checksum",
    "read_tensor",
    "write_tensor",
    "read_fixture_manifest",
]

VGWF_MAGIC = b"VGWF"
VGWF_VERSION = 1

# (name, in_channels, out_channels) for the 9 conv layers, forward order.
CONV_CHAIN = (
    ("conv1_1", 3, 64),
    ("conv1_2", 64, 64),
    ("conv2_1", 64, 128),
    ("conv2_2", 128, 128),
    ("conv3_1", 128, 256),
    ("conv3_2", 256, 256),
    ("conv3_3", 256, 256),
    ("conv3_4", 256, 256),
    ("conv4_1", 256, 512),
)

# Forward plan as segments ending at each tap.  Every conv is followed by a
# ReLU; "pool" is a 2x2/stride-2 max pool.  Tap i is the activation right
# after the segment's last ReLU.
FORWARD_PLAN = (
    (1, ("conv1_1",)),
    (2, ("conv1_2", "pool", "conv2_1")),
    (3, ("conv2_2", "pool", "conv3_1")),
    (4, ("conv3_2", "conv3_3", "conv3_4", "pool", "conv4_1")),
)

TAP_CHANNELS = {1: 64, 2: 128, 3: 256, 4: 512}
TAP_NAMES = {1: "relu1_1", 2: "relu2_1", 3: "relu3_1", 4: "relu4_1"}


class WeightFileError(Exception):
    """Base class for VGWF loading failures."""


class WeightFormatError(WeightFileError):
    """The file is not a VGWF container (bad magic or version)."""


class WeightCorruptionError(WeightFileError):
    """The container is structurally damaged (truncated, trailing bytes, non-finite payload)."""


class IncompatibleModelError(WeightFileError):
    """The container holds something other than the expected VGG-19 prefix."""


@dataclass(frozen=True)
class ConvLayer:
    """One 3x3 convolution layer: weights (out, in, 3, 3) f32 and bias (out,) f32."""

    name: str
    weights: np.ndarray
    bias: np.ndarray

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def in_channels(self):
        return self.weights.shape[1]


@dataclass(frozen=True)
class VggBackbone:
    """The 9 conv layers of the VGG-19 prefix, immutable and thread-shareable."""

    convs: tuple

    def __post_init__(self):
        by_name = {layer.name: layer for layer in self.convs}
        object.__setattr__(self, "_by_name", by_name)

    def conv(self, name):
        return self._by_name[name]


def load_backbone(path):
    """Parse a VGWF weight file and validate it against the VGG-19 prefix.

    Raises
    ------
    WeightFormatError
        Bad magic bytes or unsupported version.
    WeightCorruptionError
        Truncated payload, trailing bytes, or non-finite weights.
    IncompatibleModelError
        Layer names, order, kernel size, or channel chain do not match the
        conv1_1 ... conv4_1 prefix.
    """
    blob = Path(path).read_bytes()
    cursor = _Cursor(blob)
    magic = cursor.take(4, "magic")
    if magic != VGWF_MAGIC:
        raise WeightFormatError(f"bad magic {magic!r}: not a VGWF weight file")
    version = cursor.u32("version")
    if version != VGWF_VERSION:
        raise WeightFormatError(f"unsupported VGWF version {version}")
    count = cursor.u32("layer count")
    if count != len(CONV_CHAIN):
        raise IncompatibleModelError(
            f"expected {len(CONV_CHAIN)} conv layers for the VGG-19 prefix, file has {count}"
        )
    layers = []
    for expected_name, expected_in, expected_out in CONV_CHAIN:
        name_len = cursor.u32("name length")
        if name_len > 256:
            raise WeightCorruptionError(f"implausible layer-name length {name_len}")
        name = cursor.take(name_len, "layer name").decode("utf-8")
        out_ch = cursor.u32("out_channels")
        in_ch = cursor.u32("in_channels")
        kh = cursor.u32("kernel height")
        kw = cursor.u32("kernel width")
        if name != expected_name:
            raise IncompatibleModelError(
                f"layer order mismatch: expected {expected_name!r}, found {name!r}"
            )
        if kh != 3 or kw != 3:
            raise IncompatibleModelError(f"{name}: kernel must be 3x3, got {kh}x{kw}")
        if (in_ch, out_ch) != (expected_in, expected_out):
            raise IncompatibleModelError(
                f"{name}: channel chain mismatch, expected {expected_in}->{expected_out}, "
                f"got {in_ch}->{out_ch}"
            )
        weights = cursor.f32(out_ch * in_ch * 9, f"{name} weights").reshape(out_ch, in_ch, 3, 3)
        bias = cursor.f32(out_ch, f"{name} biases")
        if not np.isfinite(weights).all() or not np.isfinite(bias).all():
            raise WeightCorruptionError(f"{name}: non-finite weight payload")
        layers.append(ConvLayer(name, weights, bias))
    if cursor.remaining():
        raise WeightCorruptionError(f"{cursor.remaining()} trailing bytes after last layer")
    return VggBackbone(convs=tuple(layers))


def write_backbone(backbone, path):
    """Serialize a backbone to the VGWF container (the loader's inverse)."""
    chunks = [VGWF_MAGIC, struct.pack("<II", VGWF_VERSION, len(backbone.convs))]
    for layer in backbone.convs:
        name = layer.name.encode("utf-8")
        out_ch, in_ch, kh, kw = layer.weights.shape
        chunks.append(struct.pack("<I", len(name)))
        chunks.append(name)
        chunks.append(struct.pack("<IIII", out_ch, in_ch, kh, kw))
        chunks.append(np.ascontiguousarray(layer.weights, dtype="<f4").tobytes())
        chunks.append(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def random_backbone(seed=0):
    """Synthetic stand-in backbone for tests and demos.

    Weights are He-scaled Gaussian draws from a frozen RandomState stream,
    so a given seed reproduces the same backbone forever.  Useless for
    recognition but exercises the full pipeline with realistic shapes and
    activation magnitudes when no exported weights are at hand.
    """
    rs = np.random.RandomState(seed)
    layers = []
    for name, in_ch, out_ch in CONV_CHAIN:
        scale = np.sqrt(2.0 / (in_ch * 9))
        weights = rs.normal(0.0, scale, size=(out_ch, in_ch, 3, 3)).astype(np.float32)
        bias = rs.uniform(-0.05, 0.05, size=out_ch).astype(np.float32)
        layers.append(ConvLayer(name, weights, bias))
    return VggBackbone(convs=tuple(layers))


def conv3x3_same(stack, layer):
    """Spatial "same" 3x3 convolution: zero pad 1, stride 1, plus bias.

    Cross-correlation orientation (the kernel is applied without flipping).
    Accumulation walks the nine kernel offsets in a fixed order, so output
    bits do not depend on BLAS thread count.
    """
    stack = np.asarray(stack, dtype=np.float32)
    if stack.ndim != 3:
        raise ValueError(f"expected a (channels, H, W) stack, got shape {stack.shape}")
    c, h, w = stack.shape
    if c != layer.in_channels:
        raise ValueError(
            f"{layer.name}: input has {c} channels, layer expects {layer.in_channels}"
        )
    padded = np.zeros((c, h + 2, w + 2), dtype=np.float32)
    padded[:, 1:-1, 1:-1] = stack
    out = None
    for p in range(3):
        for q in range(3):
            term = np.tensordot(layer.weights[:, :, p, q], padded[:, p:p + h, q:q + w], axes=1)
            out = term if out is None else out + term
    out += layer.bias[:, None, None]
    return out


def relu(stack):
    """Elementwise max(0, x)."""
    return np.maximum(stack, 0.0)


def maxpool2(stack):
    """2x2 window maximum with stride 2; input spatial dims must be even."""
    c, h, w = stack.shape
    if h % 2 or w % 2:
        raise ValueError(
            f"max pool needs even spatial dimensions, got {h}x{w} "
            "(padding policy violated upstream)"
        )
    return stack.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))


def extract_features(detail, backbone, taps=(1, 2, 3, 4), input_scale=1.0, input_offset=0.0):
    """Run the detail content through the prefix and harvest tap activations.

    The single detail channel is replicated into the 3 network inputs after
    the affine preprocessing ``x * input_scale + input_offset`` (defaults
    feed the signed detail unchanged; downstream use is a relative activity
    comparison between two inputs processed identically, so any common
    monotone preprocessing is acceptable).

    Parameters
    ----------
    detail : np.ndarray
        2-D detail content whose dimensions are multiples of 8.
    backbone : VggBackbone
    taps : iterable of int
        Subset of {1, 2, 3, 4}; the pass stops after the deepest one.

    Returns
    -------
    dict[int, np.ndarray]
        Tap index -> (channels, H / 2**(i-1), W / 2**(i-1)) float32 stack.
    """
    detail = np.asarray(detail, dtype=np.float64)
    if detail.ndim != 2:
        raise ValueError(f"expected a 2-D detail image, got shape {detail.shape}")
    h, w = detail.shape
    if h % 8 or w % 8:
        raise ValueError(
            f"detail dimensions must be multiples of 8, got {h}x{w}: caller must pad first"
        )
    taps = sorted(set(int(t) for t in taps))
    if not taps or any(t not in TAP_CHANNELS for t in taps):
        raise ValueError(f"taps must be a nonempty subset of {{1, 2, 3, 4}}, got {taps}")
    x = (detail * input_scale + input_offset).astype(np.float32)
    x = np.repeat(x[None, :, :], 3, axis=0)
    captured = {}
    for tap, ops in FORWARD_PLAN:
        for op in ops:
            if op == "pool":
                x = maxpool2(x)
            else:
                x = relu(conv3x3_same(x, backbone.conv(op)))
        captured[tap] = x
        if tap == taps[-1]:
            break
    return {t: captured[t] for t in taps}


def layer_checksum(layer):
    """sha256 over the layer's VGWF payload bytes (f32 weights then biases)."""
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(layer.weights, dtype="<f4").tobytes())
    digest.update(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
    return digest.hexdigest()


def write_tensor(array, path):
    """Write a (C, H, W) float32 tensor as raw f32 with a "C H W" header line."""
    array = np.ascontiguousarray(array, dtype="<f4")
    if array.ndim != 3:
        raise ValueError(f"expected a (C, H, W) tensor, got shape {array.shape}")
    c, h, w = array.shape
    with open(path, "wb") as fh:
        fh.write(f"{c} {h} {w}\n".encode("ascii"))
        fh.write(array.tobytes())


def read_tensor(path):
    """Read a raw f32 tensor written by :func:`write_tensor`."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        if len(header) != 3:
            raise ValueError(f"{path}: malformed tensor header {header!r}, expected 'C H W'")
        c, h, w = (int(v) for v in header)
        payload = fh.read()
    expected = c * h * w * 4
    if len(payload) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, found {len(payload)}")
    return np.frombuffer(payload, dtype="<f4").reshape(c, h, w).copy()


@dataclass(frozen=True)
class FixtureManifest:
    """Parsed fixture manifest: layer checksums plus fixture tensor paths."""

    checksums: dict
    inputs: dict
    activations: dict


def read_fixture_manifest(path):
    """Parse a fixture manifest; tensor paths resolve relative to the manifest.

    Line grammar (blank lines and ``#`` comments ignored)::

        checksum <layer-name> <sha256-hex>
        input <label> <relative-path>
        activation <label> <tap-index> <relative-path>
    """
    path = Path(path)
    base = path.parent
    checksums, inputs, activations = {}, {}, {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        kind = fields[0]
        if kind == "checksum" and len(fields) == 3:
            checksums[fields[1]] = fields[2]
        elif kind == "input" and len(fields) == 3:
            inputs[fields[1]] = base / fields[2]
        elif kind == "activation" and len(fields) == 4:
            activations[(fields[1], int(fields[2]))] = base / fields[3]
        else:
            raise ValueError(f"{path}:{lineno}: unrecognized manifest line {raw!r}")
    return FixtureManifest(checksums=checksums, inputs=inputs, activations=activations)


class _Cursor:
    """Bounds-checked reader over the VGWF byte blob."""

    def __init__(self, blob):
        self.blob = blob
        self.offset = 0

    def take(self, n, what):
        if self.offset + n > len(self.blob):
            raise WeightCorruptionError(
                f"truncated file: wanted {n} bytes for {what} at offset {self.offset}, "
                f"only {len(self.blob) - self.offset} left"
            )
        chunk = self.blob[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def f32(self, count, what):
        raw = self.take(4 * count, what)
        return np.frombuffer(raw, dtype="<f4", count=count).copy()

    def remaining(self):
        return len(self.blob) - self.offset
