"""Embedding exporter: runs a pretrained contextual encoder over a tokenized
JSONL dataset and writes per-token vectors in the EPNE binary format."""

from .export import ExportConfig, ExportError, export

__all__ = ["ExportConfig", "ExportError", "export"]

__version__ = "0.1.0"
