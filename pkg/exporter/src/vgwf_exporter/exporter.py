"""One-shot conversion of a pretrained VGG-19 checkpoint into VGWF form.

Two operations, usually run together through :func:`export`:

``export_weights``
    Pulls the nine convolution layers conv1_1 through conv4_1 out of a
    standard checkpoint (torchvision ``features.N`` key layout), writes them
    to a single little-endian binary container, and records a sha256
    checksum per layer in a flat-text manifest.

``emit_fixtures``
    Runs the reference model on two fixed inputs, an all-zero image and a
    seeded uniform pattern, and saves the four tap activations (after
    relu1_1, relu2_1, relu3_1, relu4_1) as raw float32 tensors.  A consumer
    that reimplements the forward pass can replay these files to validate
    its arithmetic end to end.

The container layout is deliberately written out longhand here rather than
shared with any consumer, so that a byte-level bug in either side shows up
as a cross-check failure instead of being mirrored.
"""

from __future__ import annotations

import hashlib
import pickle
import struct
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

__all__ = [
    "ExportError",
    "ExportManifest",
    "export",
    "export_weights",
    "emit_fixtures",
    "synthetic_state_dict",
]

VGWF_MAGIC = b"VGWF"
VGWF_VERSION = 1

# (layer name, torchvision features index, in channels, out channels)
CONV_LAYERS = (
    ("conv1_1", 0, 3, 64),
    ("conv1_2", 2, 64, 64),
    ("conv2_1", 5, 64, 128),
    ("conv2_2", 7, 128, 128),
    ("conv3_1", 10, 128, 256),
    ("conv3_2", 12, 256, 256),
    ("conv3_3", 14, 256, 256),
    ("conv3_4", 16, 256, 256),
    ("conv4_1", 19, 256, 512),
)

# forward schedule up to each tap; pools sit between the blocks
TAP_PLAN = (
    (1, ("conv1_1",)),
    (2, ("conv1_2", "pool", "conv2_1")),
    (3, ("conv2_2", "pool", "conv3_1")),
    (4, ("conv3_2", "conv3_3", "conv3_4", "pool", "conv4_1")),
)

FIXTURE_SIDE = 16
FIXTURE_SEED = 16


class ExportError(ValueError):
    """Checkpoint unusable: missing layer, bad shape, or corrupt values."""


@dataclass
class ExportManifest:
    """Everything the flat-text manifest records about one export."""

    source: str
    weight_path: Path
    checksums: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    activations: dict = field(default_factory=dict)


def export(checkpoint, out_dir, weight_name="vgg19_prefix.vgwf"):
    """Export weights and fixtures under ``out_dir``; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = export_weights(checkpoint, out_dir / weight_name)
    emit_fixtures(checkpoint, manifest)
    return manifest


def export_weights(checkpoint, out_path):
    """Write the nine-layer VGWF container plus a checksum manifest.

    ``checkpoint`` is a state-dict mapping or a path to one (torch.load'd
    with ``map_location='cpu'``).  Keys beyond the nine exported layers are
    ignored, so full VGG-19 checkpoints work as-is.
    """
    source, state = _load_state(checkpoint)
    out_path = Path(out_path)
    layers = [(name, *_layer_arrays(state, name, index, in_ch, out_ch))
              for name, index, in_ch, out_ch in CONV_LAYERS]

    blob = bytearray()
    blob += VGWF_MAGIC
    blob += struct.pack("<II", VGWF_VERSION, len(layers))
    manifest = ExportManifest(source=source, weight_path=out_path)
    for name, weights, bias in layers:
        encoded = name.encode("ascii")
        out_ch, in_ch, kh, kw = weights.shape
        blob += struct.pack("<I", len(encoded))
        blob += encoded
        blob += struct.pack("<IIII", out_ch, in_ch, kh, kw)
        payload = weights.tobytes() + bias.tobytes()
        blob += payload
        manifest.checksums[name] = hashlib.sha256(payload).hexdigest()
    out_path.write_bytes(bytes(blob))
    _write_manifest(manifest)
    return manifest


def emit_fixtures(checkpoint, manifest):
    """Run the reference forward pass and save the golden tap activations.

    Fixture preprocessing mirrors the consumer: the single input channel is
    replicated to three, with no mean subtraction.  Inputs are an all-zero
    image and a fixed seeded uniform pattern in [-0.5, 0.5], both 16x16.
    Everything runs in float32 on a single CPU thread so re-runs are
    byte-identical.
    """
    _, state = _load_state(checkpoint)
    tensors = {}
    for name, index, in_ch, out_ch in CONV_LAYERS:
        weights, bias = _layer_arrays(state, name, index, in_ch, out_ch)
        tensors[name] = (torch.from_numpy(weights), torch.from_numpy(bias))

    side = FIXTURE_SIDE
    pattern = np.random.RandomState(FIXTURE_SEED).uniform(
        -0.5, 0.5, (side, side)).astype(np.float32)
    images = {"zero": np.zeros((side, side), dtype=np.float32), "pattern": pattern}

    fixture_dir = manifest.weight_path.parent / "fixtures"
    fixture_dir.mkdir(parents=True, exist_ok=True)
    threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        with torch.no_grad():
            for label, image in images.items():
                input_path = fixture_dir / f"{label}_input.f32"
                _write_tensor(image[None], input_path)
                manifest.inputs[label] = input_path
                x = torch.from_numpy(np.repeat(image[None], 3, axis=0))[None]
                for tap, ops in TAP_PLAN:
                    for op in ops:
                        if op == "pool":
                            x = F.max_pool2d(x, 2)
                        else:
                            weights, bias = tensors[op]
                            x = F.relu(F.conv2d(x, weights, bias, padding=1))
                    activation = x[0].numpy()
                    _check_tap_shape(tap, activation.shape)
                    tap_path = fixture_dir / f"{label}_tap{tap}.f32"
                    _write_tensor(activation, tap_path)
                    manifest.activations[(label, tap)] = tap_path
    finally:
        torch.set_num_threads(threads)
    _write_manifest(manifest)


def _check_tap_shape(tap, shape):
    spatial = FIXTURE_SIDE // 2 ** (tap - 1)
    expected = (64 * 2 ** (tap - 1), spatial, spatial)
    if shape != expected:
        raise ExportError(f"tap {tap}: expected activation shape {expected}, got {shape}")


def _write_tensor(array, path):
    array = np.ascontiguousarray(array, dtype="<f4")
    c, h, w = array.shape
    with open(path, "wb") as fh:
        fh.write(f"{c} {h} {w}\n".encode("ascii"))
        fh.write(array.tobytes())


def _write_manifest(manifest):
    path = manifest.weight_path.parent / "manifest.txt"
    base = path.parent
    lines = [
        "# VGWF export manifest",
        f"# source: {manifest.source}",
        f"# weights: {manifest.weight_path.name}",
    ]
    lines += [f"checksum {name} {digest}" for name, digest in manifest.checksums.items()]
    lines += [f"input {label} {p.relative_to(base).as_posix()}"
              for label, p in manifest.inputs.items()]
    lines += [f"activation {label} {tap} {p.relative_to(base).as_posix()}"
              for (label, tap), p in manifest.activations.items()]
    path.write_text("\n".join(lines) + "\n")


def _load_state(checkpoint):
    if isinstance(checkpoint, Mapping):
        state = checkpoint
        source = "<in-memory state dict>"
    else:
        try:
            state = torch.load(checkpoint, map_location="cpu", weights_only=True)
        except (RuntimeError, EOFError, ValueError, pickle.UnpicklingError) as exc:
            raise ExportError(f"cannot read checkpoint {checkpoint}: {exc}") from exc
        source = str(checkpoint)
        if not isinstance(state, Mapping):
            raise ExportError(f"checkpoint {checkpoint} is not a state dict")
    if isinstance(state.get("state_dict"), Mapping):
        state = state["state_dict"]
    return source, state


def _layer_arrays(state, name, index, in_ch, out_ch):
    weights = _fetch(state, name, f"features.{index}.weight", (out_ch, in_ch, 3, 3))
    bias = _fetch(state, name, f"features.{index}.bias", (out_ch,))
    return weights, bias


def _fetch(state, name, key, shape):
    if key not in state:
        raise ExportError(f"checkpoint is missing {key} ({name})")
    tensor = state[key]
    array = np.ascontiguousarray(
        tensor.detach().cpu().numpy() if isinstance(tensor, torch.Tensor) else tensor,
        dtype="<f4")
    if array.shape != shape:
        raise ExportError(f"{key} ({name}): expected shape {shape}, got {array.shape}")
    if not np.isfinite(array).all():
        raise ExportError(f"{key} ({name}): non-finite values")
    return array


def synthetic_state_dict(seed):
    """A correctly shaped stand-in checkpoint for tests and dry runs.

    He-scaled random convolutions under the torchvision key layout,
    including one layer past the exported prefix so consumers exercise the
    ignore-extra-keys path.
    """
    rs = np.random.RandomState(seed)
    state = {}
    extended = CONV_LAYERS + (("conv4_2", 21, 512, 512),)
    for _, index, in_ch, out_ch in extended:
        scale = np.sqrt(2.0 / (in_ch * 9))
        weights = rs.normal(0.0, scale, (out_ch, in_ch, 3, 3)).astype(np.float32)
        bias = rs.uniform(-0.05, 0.05, out_ch).astype(np.float32)
        state[f"features.{index}.weight"] = torch.from_numpy(weights)
        state[f"features.{index}.bias"] = torch.from_numpy(bias)
    return state
