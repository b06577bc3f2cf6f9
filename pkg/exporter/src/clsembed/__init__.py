"""Transformer CLS-embedding exporter for SMILES descriptor files."""

from .exporter import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_MODEL,
    DEFAULT_SOURCE_TAG,
    ExportError,
    ExportResult,
    export_embeddings,
    read_smiles_list,
)

__all__ = [
    "DEFAULT_MAX_TOKENS",
    "DEFAULT_MODEL",
    "DEFAULT_SOURCE_TAG",
    "ExportError",
    "ExportResult",
    "export_embeddings",
    "read_smiles_list",
]

__version__ = "0.1.0"
