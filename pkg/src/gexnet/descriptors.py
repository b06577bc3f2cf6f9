"""Component descriptor vectors: SMILES tokenization, a hashed
fallback featurizer, and the descriptor table file format.

Descriptors are keyed by verbatim SMILES text; no canonicalization is
performed, so callers must pre-canonicalize if they want synonyms to
collapse.  The CSV format written here is the exchange contract for
externally computed embedding files as well.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataValidationError,
    DomainError,
    SmilesParseError,
    TableFormatError,
)

__all__ = [
    "DEFAULT_DESCRIPTOR_DIM",
    "DEFAULT_FEATURIZER_SEED",
    "ComponentDescriptor",
    "DescriptorTable",
    "build_feature_table",
    "featurize",
    "load_descriptor_table",
    "tokenize_smiles",
    "write_descriptor_table",
]

DEFAULT_DESCRIPTOR_DIM = 384
DEFAULT_FEATURIZER_SEED = 17

_TWO_LETTER = ("Cl", "Br")
_ONE_LETTER = frozenset("BCNOPSFI")
_AROMATIC = frozenset("bcnops")
_BONDS = frozenset("-=#$:/\\")


def tokenize_smiles(s: str) -> list[str]:
    """Split a SMILES string into a lossless token list.

    Tokens are bracket atoms (kept whole), organic-subset atom symbols
    (two-letter Cl/Br before one-letter), aromatic lowercase atoms,
    ring-closure digits and %nn labels, branch parentheses, bond
    symbols, and the dot separator.  Concatenating the tokens
    reproduces the input exactly.
    """
    if not isinstance(s, str) or not s:
        raise SmilesParseError("empty SMILES", offset=0)
    tokens: list[str] = []
    open_parens: list[int] = []
    i, n = 0, len(s)
    while i < n:
        c = s[i]
        if ord(c) > 126 or ord(c) < 33:
            raise SmilesParseError(f"non-printable or non-ASCII character {c!r}", offset=i)
        if c == "[":
            j = s.find("]", i + 1)
            if j < 0:
                raise SmilesParseError("unclosed bracket atom", offset=i)
            if j == i + 1:
                raise SmilesParseError("empty bracket atom", offset=i)
            body = s[i + 1 : j]
            if "[" in body:
                raise SmilesParseError("nested '[' in bracket atom", offset=i + 1 + body.index("["))
            tokens.append(s[i : j + 1])
            i = j + 1
            continue
        if c == "]":
            raise SmilesParseError("unmatched ']'", offset=i)
        if s[i : i + 2] in _TWO_LETTER:
            tokens.append(s[i : i + 2])
            i += 2
            continue
        if c in _ONE_LETTER or c in _AROMATIC:
            tokens.append(c)
            i += 1
            continue
        if c.isdigit():
            tokens.append(c)
            i += 1
            continue
        if c == "%":
            if i + 2 < n and s[i + 1].isdigit() and s[i + 2].isdigit():
                tokens.append(s[i : i + 3])
                i += 3
                continue
            raise SmilesParseError("'%' must be followed by two digits", offset=i)
        if c == "(":
            open_parens.append(i)
            tokens.append(c)
            i += 1
            continue
        if c == ")":
            if not open_parens:
                raise SmilesParseError("unmatched ')'", offset=i)
            open_parens.pop()
            tokens.append(c)
            i += 1
            continue
        if c in _BONDS or c == ".":
            tokens.append(c)
            i += 1
            continue
        raise SmilesParseError(f"unknown character {c!r}", offset=i)
    if open_parens:
        raise SmilesParseError("unclosed '('", offset=open_parens[-1])
    return tokens


@dataclass(frozen=True)
class ComponentDescriptor:
    """A SMILES key paired with its fixed-dimension feature vector."""

    smiles: str
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64)
        if v.ndim != 1:
            raise DataValidationError("descriptor vector must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise DataValidationError(f"descriptor for {self.smiles!r} contains non-finite values")
        object.__setattr__(self, "vector", v)


def _bracket_stats(tok: str) -> tuple[int, int, bool]:
    """(isotope flag, net charge, aromatic flag) from a bracket atom token."""
    body = tok[1:-1]
    k = 0
    while k < len(body) and body[k].isdigit():
        k += 1
    isotope = 1 if k > 0 else 0
    aromatic = k < len(body) and body[k].islower()
    charge = 0
    m = 0
    while m < len(body):
        c = body[m]
        if c in "+-":
            sgn = 1 if c == "+" else -1
            digits = ""
            while m + 1 < len(body) and body[m + 1].isdigit():
                m += 1
                digits += body[m]
            charge += sgn * (int(digits) if digits else 1)
        m += 1
    return isotope, charge, aromatic


def _feature_counts(tokens: list[str]) -> dict[str, float]:
    counts: dict[str, float] = {}

    def bump(key: str, by: float = 1.0):
        counts[key] = counts.get(key, 0.0) + by

    depth = 0
    max_depth = 0
    prev = None
    for tok in tokens:
        bump("token:total")
        if prev is not None:
            bump(f"bigram:{prev}|{tok}")
        prev = tok
        if tok == "(":
            depth += 1
            max_depth = max(max_depth, depth)
            bump("branch:count")
        elif tok == ")":
            depth -= 1
        elif tok == ".":
            bump("dot:count")
        elif tok in _BONDS:
            bump(f"bond:{tok}")
        elif tok.startswith("["):
            bump(f"atom:{tok}")
            bump("atom:total")
            iso, chg, arom = _bracket_stats(tok)
            if iso:
                bump("isotope:count")
            if chg:
                bump("charge:net", chg)
            if arom:
                bump("aromatic:count")
        elif tok.isdigit() or tok.startswith("%"):
            bump("ring:closures")
            bump(f"ring:label:{tok}")
        else:
            bump(f"atom:{tok}")
            bump("atom:total")
            if tok in _AROMATIC:
                bump("aromatic:count")
    if max_depth:
        counts["branch:maxdepth"] = float(max_depth)
    return counts


def featurize(s: str, dim: int = DEFAULT_DESCRIPTOR_DIM,
              seed: int = DEFAULT_FEATURIZER_SEED) -> ComponentDescriptor:
    """Deterministic hashed token-count vector for one SMILES string.

    Each named count is hashed with a keyed blake2b into one of ``dim``
    buckets with a +/-1 sign; the bucket vector is then scaled to unit
    L2 norm unless it is identically zero.
    """
    if dim < 16:
        raise DomainError(f"descriptor dimension must be >= 16, got {dim}")
    tokens = tokenize_smiles(s)
    key = int(seed).to_bytes(8, "little", signed=True)
    v = np.zeros(dim, dtype=np.float64)
    for name, count in _feature_counts(tokens).items():
        digest = hashlib.blake2b(name.encode("utf-8"), digest_size=8, key=key).digest()
        h = int.from_bytes(digest, "little")
        idx = h % dim
        sign = 1.0 if (h >> 60) & 1 else -1.0
        v[idx] += sign * count
    norm = float(np.sqrt(np.dot(v, v)))
    if norm > 0.0:
        v /= norm
    return ComponentDescriptor(s, v)


@dataclass
class DescriptorTable:
    """Immutable-after-load map from SMILES text to descriptor vectors."""

    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    source: str = "unknown"
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, smiles: str) -> bool:
        return smiles in self.vectors

    def __getitem__(self, smiles: str) -> np.ndarray:
        return self.vectors[smiles]

    def get(self, smiles: str):
        return self.vectors.get(smiles)

    def items(self):
        return self.vectors.items()

    @property
    def smiles(self) -> list[str]:
        return list(self.vectors.keys())

    def descriptor(self, smiles: str) -> ComponentDescriptor:
        return ComponentDescriptor(smiles, self.vectors[smiles])


def build_feature_table(smiles_list, dim: int = DEFAULT_DESCRIPTOR_DIM,
                        seed: int = DEFAULT_FEATURIZER_SEED) -> DescriptorTable:
    """Featurize a list of SMILES into one table; duplicates are an error."""
    table = DescriptorTable(dim=dim, source="builtin-featurizer", seed=seed)
    for s in smiles_list:
        if s in table.vectors:
            raise DataValidationError(f"duplicate SMILES {s!r} in input list")
        table.vectors[s] = featurize(s, dim, seed).vector
    return table


def _parse_header(cells: list[str]) -> tuple[int, str, int | None]:
    if not cells or cells[0] != "smiles":
        raise TableFormatError("header must start with 'smiles'", line=1)
    dim = None
    source = "unknown"
    seed = None
    for cell in cells[1:]:
        if "=" not in cell:
            raise TableFormatError(f"malformed header tag {cell!r}", line=1)
        tag, _, value = cell.partition("=")
        if tag == "dim":
            try:
                dim = int(value)
            except ValueError:
                raise TableFormatError(f"non-integer dim {value!r}", line=1) from None
        elif tag == "source":
            source = value
        elif tag == "seed":
            try:
                seed = int(value)
            except ValueError:
                raise TableFormatError(f"non-integer seed {value!r}", line=1) from None
        else:
            raise TableFormatError(f"unknown header tag {tag!r}", line=1)
    if dim is None:
        raise TableFormatError("header missing dim=<D> tag", line=1)
    if dim <= 0:
        raise TableFormatError(f"dim must be positive, got {dim}", line=1)
    return dim, source, seed


def load_descriptor_table(path) -> DescriptorTable:
    """Read a descriptor CSV written by :func:`write_descriptor_table`.

    Header: ``smiles,dim=<D>,source=<tag>,seed=<int>`` (source and seed
    optional).  Each row holds a SMILES key and exactly D finite values.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableFormatError("empty descriptor file", line=1) from None
        dim, source, seed = _parse_header(header)
        table = DescriptorTable(dim=dim, source=source, seed=seed)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 1 + dim:
                raise TableFormatError(
                    f"expected {1 + dim} cells, got {len(row)}", line=lineno
                )
            smiles = row[0]
            if not smiles:
                raise TableFormatError("empty SMILES key", line=lineno)
            if smiles in table.vectors:
                raise TableFormatError(f"duplicate SMILES {smiles!r}", line=lineno)
            try:
                vec = np.array([float(c) for c in row[1:]], dtype=np.float64)
            except ValueError:
                raise TableFormatError("malformed numeric cell", line=lineno) from None
            if not np.all(np.isfinite(vec)):
                raise DataValidationError(
                    f"non-finite descriptor value for {smiles!r} (line {lineno})"
                )
            table.vectors[smiles] = vec
    return table


def write_descriptor_table(path, table: DescriptorTable) -> None:
    """Write a table as CSV with 17-significant-digit decimal values."""
    header = ["smiles", f"dim={table.dim}", f"source={table.source}"]
    if table.seed is not None:
        header.append(f"seed={table.seed}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for smiles, vec in table.items():
            if len(vec) != table.dim:
                raise DataValidationError(
                    f"vector for {smiles!r} has length {len(vec)}, table dim is {table.dim}"
                )
            writer.writerow([smiles] + [f"{v:.17g}" for v in vec])
