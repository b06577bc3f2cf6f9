"""Dataset records, CSV ingestion, system-wise splitting, and
standardization statistics.

A system is an unordered pair of components; its id is the
lexicographically sorted SMILES pair joined by '|', so a pair and its
permutation collapse to the same system.  Splits are always by system:
every record of a system lands in exactly one of train/val/test.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError, DomainError, TableFormatError

__all__ = [
    "DATASET_HEADER",
    "GammaRecord",
    "SplitSpec",
    "StandardizationStats",
    "apply_standardizer",
    "fit_standardizer",
    "ingest_csv",
    "split_systems",
    "standardize_temperature",
    "system_id_for",
    "write_dataset_csv",
]

DATASET_HEADER = [
    "system_id", "smiles_1", "smiles_2", "T_K", "x1",
    "ln_gamma_1", "ln_gamma_2", "source",
]


def system_id_for(smiles_a: str, smiles_b: str) -> str:
    """Unordered pair key: sorted SMILES joined by '|'."""
    a, b = sorted((smiles_a, smiles_b))
    return f"{a}|{b}"


@dataclass(frozen=True)
class GammaRecord:
    """One data point of a binary system.

    Missing activity-coefficient targets are None; at least one must be
    present.  ln_gamma1 always refers to smiles_1.
    """

    system_id: str
    smiles_1: str
    smiles_2: str
    T: float
    x1: float
    ln_gamma1: float | None
    ln_gamma2: float | None
    source_tag: str = ""

    def __post_init__(self):
        if self.ln_gamma1 is None and self.ln_gamma2 is None:
            raise DataValidationError("record must carry at least one ln gamma target")
        if not 0.0 <= self.x1 <= 1.0:
            raise DataValidationError(f"x1 must be in [0, 1], got {self.x1}")
        if not (math.isfinite(self.T) and self.T > 0.0):
            raise DataValidationError(f"temperature must be positive, got {self.T}")
        for name in ("ln_gamma1", "ln_gamma2"):
            v = getattr(self, name)
            if v is not None and not math.isfinite(v):
                raise DataValidationError(f"non-finite {name}")
        if self.system_id != system_id_for(self.smiles_1, self.smiles_2):
            raise DataValidationError(
                f"system_id {self.system_id!r} does not match sorted pair of "
                f"{self.smiles_1!r} and {self.smiles_2!r}"
            )


def ingest_csv(path) -> list[GammaRecord]:
    """Read and validate a dataset CSV.

    Structural problems (wrong header, wrong cell count, unparseable
    numbers) raise TableFormatError with the line number.  Rows that
    parse but violate record invariants are all collected and reported
    together in one DataValidationError.
    """
    records: list[GammaRecord] = []
    bad_lines: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableFormatError("empty dataset file", line=1) from None
        if header != DATASET_HEADER:
            raise TableFormatError(
                f"dataset header must be {','.join(DATASET_HEADER)}", line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(DATASET_HEADER):
                raise TableFormatError(
                    f"expected {len(DATASET_HEADER)} cells, got {len(row)}", line=lineno
                )
            try:
                T = float(row[3])
                x1 = float(row[4])
                ln1 = float(row[5]) if row[5] != "" else None
                ln2 = float(row[6]) if row[6] != "" else None
            except ValueError:
                raise TableFormatError("malformed numeric cell", line=lineno) from None
            try:
                records.append(GammaRecord(
                    system_id=row[0], smiles_1=row[1], smiles_2=row[2],
                    T=T, x1=x1, ln_gamma1=ln1, ln_gamma2=ln2, source_tag=row[7],
                ))
            except DataValidationError as exc:
                bad_lines.append(f"line {lineno}: {exc}")
    if bad_lines:
        raise DataValidationError(
            "rejected rows:\n  " + "\n  ".join(bad_lines)
        )
    return records


def write_dataset_csv(path, records) -> None:
    """Write records in the dataset CSV schema (empty cell = missing)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATASET_HEADER)
        for r in records:
            writer.writerow([
                r.system_id, r.smiles_1, r.smiles_2,
                f"{r.T:.17g}", f"{r.x1:.17g}",
                "" if r.ln_gamma1 is None else f"{r.ln_gamma1:.17g}",
                "" if r.ln_gamma2 is None else f"{r.ln_gamma2:.17g}",
                r.source_tag,
            ])


@dataclass(frozen=True)
class SplitSpec:
    """System-wise split fractions plus the shuffle seed."""

    train_fraction: float = 0.8
    val_fraction: float = 0.1
    test_fraction: float = 0.1
    seed: int = 10

    def __post_init__(self):
        for name in ("train_fraction", "val_fraction", "test_fraction"):
            f = getattr(self, name)
            if not 0.0 <= f <= 1.0:
                raise DomainError(f"{name} must be in [0, 1], got {f}")
        total = self.train_fraction + self.val_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"split fractions must sum to 1, got {total}")


def split_systems(records, spec: SplitSpec):
    """Deterministic system-wise split into (train, val, test) records.

    Systems are sorted by id, shuffled with the seed, then cut at
    floor(train_fraction*N) and floor(val_fraction*N); the remaining
    systems form the test set.  With fractions (0.8, 0.1, 0.1) this
    sends rounding remainders to test: 10 systems give 8/1/1 and
    35,012 give 28,009/3,501/3,502.
    """
    by_system: dict[str, list] = {}
    for r in records:
        by_system.setdefault(r.system_id, []).append(r)
    n = len(by_system)
    if n < 3:
        raise DataValidationError(f"need at least 3 systems to split, got {n}")
    ids = sorted(by_system)
    order = np.random.default_rng(spec.seed).permutation(n)
    n_train = math.floor(spec.train_fraction * n)
    n_val = math.floor(spec.val_fraction * n)
    shuffled = [ids[k] for k in order]
    train_ids = shuffled[:n_train]
    val_ids = shuffled[n_train:n_train + n_val]
    test_ids = shuffled[n_train + n_val:]
    def collect(id_list):
        out = []
        for sid in id_list:
            out.extend(by_system[sid])
        return out
    return collect(train_ids), collect(val_ids), collect(test_ids)


@dataclass(frozen=True)
class StandardizationStats:
    """Training-split z-score statistics for descriptors and temperature.

    Mole fractions are never standardized.
    """

    descriptor_mean: np.ndarray
    descriptor_std: np.ndarray
    T_mean: float
    T_std: float

    def __post_init__(self):
        dm = np.asarray(self.descriptor_mean, dtype=np.float64)
        ds = np.asarray(self.descriptor_std, dtype=np.float64)
        if dm.shape != ds.shape or dm.ndim != 1:
            raise DataValidationError("descriptor mean/std must be 1-D and congruent")
        if np.any(ds <= 0.0) or self.T_std <= 0.0:
            raise DataValidationError("standard deviations must be positive")
        object.__setattr__(self, "descriptor_mean", dm)
        object.__setattr__(self, "descriptor_std", ds)


def fit_standardizer(train_records, table) -> StandardizationStats:
    """Per-dimension mean/std over training-record component descriptors.

    Each record contributes both of its components once, so frequently
    occurring components weigh more, as in a scaler fit over the design
    matrix.  Zero-variance dimensions get std clamped to 1 with a
    warning.  Population (ddof=0) standard deviations.
    """
    train_records = list(train_records)
    if not train_records:
        raise DataValidationError("cannot fit standardizer on an empty split")
    missing = sorted({
        s for r in train_records for s in (r.smiles_1, r.smiles_2) if s not in table
    })
    if missing:
        raise DataValidationError(
            "descriptor table is missing components: " + ", ".join(map(repr, missing))
        )
    rows = np.empty((2 * len(train_records), table.dim), dtype=np.float64)
    for i, r in enumerate(train_records):
        rows[2 * i] = table[r.smiles_1]
        rows[2 * i + 1] = table[r.smiles_2]
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    zero = std == 0.0
    if np.any(zero):
        warnings.warn(
            f"{int(zero.sum())} zero-variance descriptor dimension(s); std clamped to 1",
            stacklevel=2,
        )
        std = np.where(zero, 1.0, std)
    temps = np.array([r.T for r in train_records], dtype=np.float64)
    T_mean = float(temps.mean())
    T_std = float(temps.std())
    if T_std == 0.0:
        warnings.warn("zero-variance temperature; std clamped to 1", stacklevel=2)
        T_std = 1.0
    return StandardizationStats(mean, std, T_mean, T_std)


def apply_standardizer(stats: StandardizationStats, vectors) -> np.ndarray:
    """Z-score descriptor vectors (last axis must match the fitted dim)."""
    v = np.asarray(vectors, dtype=np.float64)
    if v.shape[-1] != stats.descriptor_mean.shape[0]:
        raise DataValidationError(
            f"descriptor dimension {v.shape[-1]} does not match fitted "
            f"{stats.descriptor_mean.shape[0]}"
        )
    return (v - stats.descriptor_mean) / stats.descriptor_std


def standardize_temperature(stats: StandardizationStats, T) -> np.ndarray:
    """Z-score temperatures with the training-split statistics."""
    return (np.asarray(T, dtype=np.float64) - stats.T_mean) / stats.T_std
