"""VGG-19 prefix weight exporter: VGWF container plus golden fixtures."""

from .exporter import (
    CONV_LAYERS,
    ExportError,
    ExportManifest,
    emit_fixtures,
    export,
    export_weights,
    synthetic_state_dict,
)

__version__ = "1.0.0"

__all__ = [
    "CONV_LAYERS",
    "ExportError",
    "ExportManifest",
    "emit_fixtures",
    "export",
    "export_weights",
    "synthetic_state_dict",
]
