"""Export last-layer CLS-token embeddings of SMILES strings.

Runs a pretrained encoder in inference mode (no dropout, no gradients)
over a SMILES list and writes a descriptor CSV: header
``smiles,dim=<D>,source=<tag>`` followed by one row per unique SMILES
with the CLS vector printed to 17 significant digits.  The format is
the descriptor-table contract of the gexnet package, so exported files
drop directly into its train and predict pipeline.

Repeated SMILES are exported once (first occurrence keeps its
position): the embedding is deterministic, so later occurrences would
carry an identical vector, and descriptor tables reject duplicate keys.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DEFAULT_MAX_TOKENS",
    "DEFAULT_MODEL",
    "DEFAULT_SOURCE_TAG",
    "ExportError",
    "ExportResult",
    "export_embeddings",
    "read_smiles_list",
]

DEFAULT_MODEL = "DeepChem/ChemBERTa-77M-MTR"
DEFAULT_SOURCE_TAG = "77M-MTR"
DEFAULT_MAX_TOKENS = 128


class ExportError(Exception):
    """Raised for invalid inputs or an unloadable model."""


@dataclass(frozen=True)
class ExportResult:
    """Summary of one export run."""

    n_written: int
    n_skipped: int
    dim: int


def read_smiles_list(path) -> list[str]:
    """Read one SMILES per line, stripping whitespace and skipping
    blank lines; duplicates collapse to their first occurrence."""
    seen: dict[str, None] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            s = line.strip()
            if s:
                seen.setdefault(s)
    if not seen:
        raise ExportError(f"no SMILES found in {path}")
    return list(seen)


def _load_encoder(model_ref: str):
    """Load tokenizer and encoder from a local directory or model id."""
    import torch
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_ref)
        model = AutoModel.from_pretrained(model_ref)
    except Exception as exc:
        raise ExportError(f"cannot load model {model_ref!r}: {exc}") from exc
    model.eval()
    return torch, tokenizer, model


def export_embeddings(smiles_path, out_path, model_ref: str = DEFAULT_MODEL,
                      max_tokens: int = DEFAULT_MAX_TOKENS,
                      source_tag: str = DEFAULT_SOURCE_TAG) -> ExportResult:
    """Embed every SMILES in ``smiles_path`` and write ``out_path``.

    Each row holds the last-layer CLS vector of the encoder; the
    descriptor dimension is the encoder's hidden size.  A SMILES whose
    encoding exceeds ``max_tokens`` tokens (special tokens included) is
    skipped with a warning.  Raises :class:`ExportError` if the list is
    empty, the model cannot be loaded, or every row was skipped.
    """
    if max_tokens < 1:
        raise ExportError(f"max_tokens must be positive, got {max_tokens}")
    smiles_list = read_smiles_list(smiles_path)
    torch, tokenizer, model = _load_encoder(model_ref)
    dim = int(model.config.hidden_size)

    rows: list[tuple[str, np.ndarray]] = []
    n_skipped = 0
    with torch.inference_mode():
        for s in smiles_list:
            n_tokens = len(tokenizer(s, add_special_tokens=True)["input_ids"])
            if n_tokens > max_tokens:
                warnings.warn(
                    f"skipping {s!r}: {n_tokens} tokens exceeds the "
                    f"{max_tokens}-token limit"
                )
                n_skipped += 1
                continue
            out = model(**tokenizer(s, return_tensors="pt"))
            vec = out.last_hidden_state[0, 0].to(torch.float64).cpu().numpy()
            rows.append((s, vec))
    if not rows:
        raise ExportError("every SMILES exceeded the token limit; nothing to export")

    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["smiles", f"dim={dim}", f"source={source_tag}"])
        for s, vec in rows:
            writer.writerow([s] + [f"{v:.17g}" for v in vec])
    return ExportResult(n_written=len(rows), n_skipped=n_skipped, dim=dim)
