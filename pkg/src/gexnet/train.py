"""Training loop: SmoothL1 loss over available targets, ADAM with
coupled L2 weight decay, plateau learning-rate decay, early stopping,
and per-epoch Gibbs-Duhem diagnostics.

Missing ln gamma targets are skipped; the loss is the mean over all
present targets (record-level mean, not mean of batch means).  Epoch
shuffling is record-level.  All randomness flows from the single
config seed, so a fixed seed reproduces the loss history bitwise.
"""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Node, Tape
from .data import (
    StandardizationStats,
    apply_standardizer,
    fit_standardizer,
    standardize_temperature,
)
from .errors import DataValidationError, DomainError, TrainingDivergedError
from .model import ArchitectureConfig, forward_slots, init_parameters

__all__ = [
    "FitResult",
    "TrainConfig",
    "adam_step",
    "batch_loss",
    "build_arrays",
    "fit",
    "init_adam_state",
    "smooth_l1",
    "write_metrics_csv",
]

METRICS_HEADER = ["epoch", "train_loss", "val_loss", "gd_msd_train", "gd_msd_val", "lr"]


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and schedule settings; defaults are the working set."""

    lr0: float = 0.0005
    lr_decay_factor: float = 0.1
    lr_patience: int = 10
    early_stop_patience: int = 30
    batch_size: int = 512
    smoothl1_beta: float = 0.25
    weight_decay: float = 1e-6
    max_epochs: int = 500
    seed: int = 10

    def __post_init__(self):
        positives = {
            "lr0": self.lr0, "lr_decay_factor": self.lr_decay_factor,
            "batch_size": self.batch_size, "smoothl1_beta": self.smoothl1_beta,
        }
        for name, v in positives.items():
            if v <= 0:
                raise DomainError(f"{name} must be positive, got {v}")
        if self.weight_decay < 0:
            raise DomainError("weight_decay must be nonnegative")
        for name, v in (("lr_patience", self.lr_patience),
                        ("early_stop_patience", self.early_stop_patience),
                        ("max_epochs", self.max_epochs)):
            if not isinstance(v, int) or v < 0:
                raise DomainError(f"{name} must be a nonnegative integer, got {v}")


def smooth_l1(pred, target, beta: float):
    """Elementwise SmoothL1: 0.5 d^2/beta below beta, |d| - beta/2 above."""
    if beta <= 0:
        raise DomainError("beta must be positive")
    d = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    ad = np.abs(d)
    return np.where(ad < beta, 0.5 * d * d / beta, ad - 0.5 * beta)


def _smooth_l1_node(tape: Tape, r: Node, beta: float) -> Node:
    """SmoothL1 of a residual node, branch chosen from current values."""
    ad = np.abs(r.value)
    quad_mask = tape.constant((ad < beta).astype(np.float64))
    lin_mask = tape.constant((ad >= beta).astype(np.float64))
    sign = tape.constant(np.sign(r.value))
    quad = r * r * (0.5 / beta)
    lin = r * sign - 0.5 * beta
    return quad * quad_mask + lin * lin_mask


@dataclass
class TrainingArrays:
    """Precomputed standardized tensors for one record list."""

    E: np.ndarray        # (n_components, D) standardized descriptors
    i1: np.ndarray       # (n,) int index of component 1 per record
    i2: np.ndarray
    x1: np.ndarray       # (n,)
    x2: np.ndarray       # 1 - x1, computed once
    tstar: np.ndarray    # (n,) standardized temperature
    t1: np.ndarray       # (n,) ln gamma 1 target, 0.0 where missing
    t2: np.ndarray
    m1: np.ndarray       # (n,) 1.0 where target present else 0.0
    m2: np.ndarray

    @property
    def n_records(self) -> int:
        return self.x1.shape[0]

    @property
    def n_targets(self) -> float:
        return float(self.m1.sum() + self.m2.sum())


def build_arrays(records, table, stats: StandardizationStats) -> TrainingArrays:
    """Standardize and index one split for batched passes."""
    records = list(records)
    if not records:
        raise DataValidationError("empty record list")
    missing = sorted({
        s for r in records for s in (r.smiles_1, r.smiles_2) if s not in table
    })
    if missing:
        raise DataValidationError(
            "descriptor table is missing components: " + ", ".join(map(repr, missing))
        )
    unique = sorted({s for r in records for s in (r.smiles_1, r.smiles_2)})
    index = {s: k for k, s in enumerate(unique)}
    E = apply_standardizer(stats, np.stack([table[s] for s in unique]))
    n = len(records)
    i1 = np.fromiter((index[r.smiles_1] for r in records), dtype=np.int64, count=n)
    i2 = np.fromiter((index[r.smiles_2] for r in records), dtype=np.int64, count=n)
    x1 = np.fromiter((r.x1 for r in records), dtype=np.float64, count=n)
    T = np.fromiter((r.T for r in records), dtype=np.float64, count=n)
    t1 = np.fromiter((0.0 if r.ln_gamma1 is None else r.ln_gamma1 for r in records),
                     dtype=np.float64, count=n)
    t2 = np.fromiter((0.0 if r.ln_gamma2 is None else r.ln_gamma2 for r in records),
                     dtype=np.float64, count=n)
    m1 = np.fromiter((0.0 if r.ln_gamma1 is None else 1.0 for r in records),
                     dtype=np.float64, count=n)
    m2 = np.fromiter((0.0 if r.ln_gamma2 is None else 1.0 for r in records),
                     dtype=np.float64, count=n)
    return TrainingArrays(
        E=E, i1=i1, i2=i2, x1=x1, x2=1.0 - x1,
        tstar=standardize_temperature(stats, T), t1=t1, t2=t2, m1=m1, m2=m2,
    )


def batch_loss(tape: Tape, p: dict[str, Node], config: ArchitectureConfig,
               arrays: TrainingArrays, idx: np.ndarray, beta: float) -> tuple[Node, float]:
    """Masked SmoothL1 mean over the batch's available targets.

    Returns the scalar loss node and the target count used as its
    denominator (for exact re-averaging across batches).
    """
    count = float(arrays.m1[idx].sum() + arrays.m2[idx].sum())
    if count == 0.0:
        raise DataValidationError("batch contains no ln gamma targets")
    col = lambda v: v.reshape(-1, 1)
    _, ln_a, ln_b = forward_slots(
        tape, p, config,
        arrays.E[arrays.i1[idx]], col(arrays.x1[idx]),
        arrays.E[arrays.i2[idx]], col(arrays.x2[idx]),
        col(arrays.tstar[idx]),
    )
    r1 = ln_a - tape.constant(col(arrays.t1[idx]))
    r2 = ln_b - tape.constant(col(arrays.t2[idx]))
    l1 = _smooth_l1_node(tape, r1, beta) * tape.constant(col(arrays.m1[idx]))
    l2 = _smooth_l1_node(tape, r2, beta) * tape.constant(col(arrays.m2[idx]))
    loss = tape.sum(l1 + l2) * (1.0 / count)
    return loss, count


def init_adam_state(params: dict[str, np.ndarray]) -> dict:
    return {
        "m": {k: np.zeros_like(v) for k, v in params.items()},
        "v": {k: np.zeros_like(v) for k, v in params.items()},
        "step": 0,
    }


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: dict, lr: float, config: TrainConfig) -> None:
    """One in-place ADAM update with coupled L2 weight decay.

    beta1=0.9, beta2=0.999, eps=1e-8, bias correction; the decay term
    lambda*param is added to the gradient before the moment updates.
    """
    b1, b2, eps = 0.9, 0.999, 1e-8
    state["step"] += 1
    t = state["step"]
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for name, p_arr in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(f"non-finite gradient for parameter {name}")
        if config.weight_decay > 0.0:
            g = g + config.weight_decay * p_arr
        m = state["m"][name]
        v = state["v"][name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p_arr -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def _split_loss(params, config: ArchitectureConfig, arrays: TrainingArrays,
                beta: float, chunk: int = 4096) -> float:
    """Forward-only loss over a whole split, chunked, target-mean."""
    total = 0.0
    count = 0.0
    for start in range(0, arrays.n_records, chunk):
        idx = np.arange(start, min(start + chunk, arrays.n_records))
        tape = Tape()
        p = {k: tape.constant(v) for k, v in params.items()}
        loss, n_t = batch_loss(tape, p, config, arrays, idx, beta)
        total += float(loss.value) * n_t
        count += n_t
    return total / count


def _gd_msd_on_arrays(params, config: ArchitectureConfig, arrays: TrainingArrays,
                      idx: np.ndarray, h: float = 1e-4) -> float:
    """Central-difference Gibbs-Duhem mean squared deviation on queries
    taken from the given records, compositions clamped interior."""
    from .model import predict_slots

    x = np.clip(arrays.x1[idx], h, 1.0 - h)
    Ea = arrays.E[arrays.i1[idx]]
    Eb = arrays.E[arrays.i2[idx]]
    ts = arrays.tstar[idx]
    up = predict_slots(params, config, Ea, x + h, Eb, 1.0 - (x + h), ts)
    dn = predict_slots(params, config, Ea, x - h, Eb, 1.0 - (x - h), ts)
    D1 = (up.ln_gamma1 - dn.ln_gamma1) / (2.0 * h)
    D2 = (up.ln_gamma2 - dn.ln_gamma2) / (2.0 * h)
    res = x * D1 + (1.0 - x) * D2
    return float(np.mean(res * res))


@dataclass
class FitResult:
    """Best-validation parameters plus the full training history."""

    params: dict[str, np.ndarray]
    stats: StandardizationStats
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = math.inf
    diverged: bool = False
    stop_reason: str = ""


def fit(train_records, val_records, table, arch: ArchitectureConfig,
        config: TrainConfig) -> FitResult:
    """Train a model, returning the checkpoint with the best validation
    loss seen and the per-epoch metric history.

    On divergence (non-finite validation loss or gradients) the loop
    aborts and the last good checkpoint is returned with the diverged
    flag set.
    """
    stats = fit_standardizer(train_records, table)
    arr_train = build_arrays(train_records, table, stats)
    arr_val = build_arrays(val_records, table, stats)
    params = init_parameters(arch, config.seed)
    best_params = copy.deepcopy(params)
    result = FitResult(params=best_params, stats=stats)

    rng = np.random.default_rng(config.seed)
    gd_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x6D]))
    gd_idx_train = gd_rng.permutation(arr_train.n_records)[:128]
    gd_idx_val = gd_rng.permutation(arr_val.n_records)[:128]

    state = init_adam_state(params)
    lr = config.lr0
    bad_lr = 0
    bad_stop = 0
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(arr_train.n_records)
        run_total = 0.0
        run_count = 0.0
        try:
            for start in range(0, arr_train.n_records, config.batch_size):
                idx = perm[start:start + config.batch_size]
                tape = Tape()
                p = {k: tape.parameter(k, v) for k, v in params.items()}
                loss, n_t = batch_loss(tape, p, arch, arr_train, idx,
                                       config.smoothl1_beta)
                grads = tape.backward(loss)
                adam_step(params, grads, state, lr, config)
                run_total += float(loss.value) * n_t
                run_count += n_t
        except TrainingDivergedError:
            result.diverged = True
            result.stop_reason = "non-finite gradient"
            break
        train_loss = run_total / run_count
        val_loss = _split_loss(params, arch, arr_val, config.smoothl1_beta)
        result.history.append({
            "epoch": epoch,
            "train_loss": train_loss,
            "val_loss": val_loss,
            "gd_msd_train": _gd_msd_on_arrays(params, arch, arr_train, gd_idx_train),
            "gd_msd_val": _gd_msd_on_arrays(params, arch, arr_val, gd_idx_val),
            "lr": lr,
        })
        if not math.isfinite(val_loss):
            result.diverged = True
            result.stop_reason = "non-finite validation loss"
            break
        if val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            result.best_epoch = epoch
            result.params = copy.deepcopy(params)
            bad_lr = 0
            bad_stop = 0
        else:
            bad_lr += 1
            bad_stop += 1
            if bad_stop >= config.early_stop_patience:
                result.stop_reason = (
                    f"no improvement for {config.early_stop_patience} epochs"
                )
                break
            if bad_lr > config.lr_patience:
                lr *= config.lr_decay_factor
                bad_lr = 0
    else:
        result.stop_reason = result.stop_reason or "max_epochs reached"
    return result


def write_metrics_csv(path, history) -> None:
    """Per-epoch metrics in the run-directory CSV schema."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for row in history:
            writer.writerow([row["epoch"]] + [f"{row[k]:.17g}" for k in METRICS_HEADER[1:]])
