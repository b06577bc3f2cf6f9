"""Evaluation metrics and thermodynamic-consistency audits.

All audit derivatives use central finite differences with step h=1e-4,
clamping compositions so x1 +/- h stays inside [0, 1].  The consistency
certificate checks the four structural criteria on a sample of random
queries: pure-component limits, pseudo-binary zeros, bit-exact
permutation swaps, and the Gibbs-Duhem residual.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .data import apply_standardizer, standardize_temperature
from .errors import DataValidationError
from .model import ArchitectureConfig, predict_gammas, predict_slots

__all__ = [
    "consistency_certificate",
    "cumulative_fraction",
    "gibbs_duhem_msd",
    "gibbs_duhem_residuals",
    "mae_histogram",
    "predict_records",
    "system_mae",
    "write_certificate_json",
    "write_cumulative_csv",
    "write_histogram_csv",
]


def predict_records(params, config: ArchitectureConfig, stats, table, records):
    """Standardize and predict a record list; returns (ln1, ln2) arrays."""
    records = list(records)
    if not records:
        raise DataValidationError("no records to predict")
    E1 = apply_standardizer(stats, np.stack([table[r.smiles_1] for r in records]))
    E2 = apply_standardizer(stats, np.stack([table[r.smiles_2] for r in records]))
    T = standardize_temperature(stats, np.array([r.T for r in records]))
    x1 = np.array([r.x1 for r in records], dtype=np.float64)
    pred = predict_gammas(params, config, E1, E2, T, x1)
    return pred.ln_gamma1, pred.ln_gamma2


def system_mae(records, pred_ln1, pred_ln2) -> dict[str, float]:
    """Per-system mean |prediction - target| over all available targets."""
    records = list(records)
    if not records:
        raise DataValidationError("system_mae needs at least one record")
    if len(pred_ln1) != len(records) or len(pred_ln2) != len(records):
        raise DataValidationError("prediction arrays must align with records")
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for i, r in enumerate(records):
        for target, pred in ((r.ln_gamma1, pred_ln1[i]), (r.ln_gamma2, pred_ln2[i])):
            if target is None:
                continue
            sums[r.system_id] = sums.get(r.system_id, 0.0) + abs(float(pred) - target)
            counts[r.system_id] = counts.get(r.system_id, 0) + 1
    return {sid: sums[sid] / counts[sid] for sid in sums}


def cumulative_fraction(maes, thresholds) -> np.ndarray:
    """Fraction of systems with MAE strictly below each threshold."""
    values = np.asarray(list(maes.values()) if isinstance(maes, dict) else maes,
                        dtype=np.float64)
    if values.size == 0:
        raise DataValidationError("cumulative_fraction needs at least one MAE")
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=np.float64))
    return np.array([(values < t).mean() for t in thresholds])


def gibbs_duhem_residuals(params, config: ArchitectureConfig, E1, E2, Tstar, x1,
                          h: float = 1e-4) -> np.ndarray:
    """Central-difference residual x1*dlng1/dx1 + (1-x1)*dlng2/dx1 per query.

    Compositions are clamped into [h, 1-h] before differencing.
    """
    x = np.clip(np.asarray(x1, dtype=np.float64), h, 1.0 - h)
    up = predict_gammas(params, config, E1, E2, Tstar, x + h)
    dn = predict_gammas(params, config, E1, E2, Tstar, x - h)
    D1 = (up.ln_gamma1 - dn.ln_gamma1) / (2.0 * h)
    D2 = (up.ln_gamma2 - dn.ln_gamma2) / (2.0 * h)
    return x * D1 + (1.0 - x) * D2


def gibbs_duhem_msd(params, config: ArchitectureConfig, E1, E2, Tstar, x1,
                    h: float = 1e-4) -> float:
    """Mean squared Gibbs-Duhem residual over the query set."""
    res = gibbs_duhem_residuals(params, config, E1, E2, Tstar, x1, h)
    return float(np.mean(res * res))


def consistency_certificate(params, config: ArchitectureConfig, n_queries: int = 100,
                            seed: int = 0, h: float = 1e-4,
                            gd_tol: float = 1e-6) -> dict:
    """Audit one parameter set against the four structural criteria.

    Queries are random standardized descriptors, temperatures, and
    compositions.  Pure-limit, pseudo-binary, and permutation criteria
    demand exact zeros / bit-identical values; the Gibbs-Duhem residual
    is checked against gd_tol with step h.  Returns a machine-readable
    report with worst-case residuals.
    """
    if n_queries < 1:
        raise DataValidationError("certificate needs at least one query")
    rng = np.random.default_rng(seed)
    d = config.descriptor_dim
    E1 = rng.normal(size=(n_queries, d))
    E2 = rng.normal(size=(n_queries, d))
    Ts = rng.uniform(-2.0, 2.0, size=n_queries)
    x1 = rng.uniform(h, 1.0 - h, size=n_queries)

    pure_hi = predict_gammas(params, config, E1, E2, Ts, np.ones(n_queries))
    pure_lo = predict_gammas(params, config, E1, E2, Ts, np.zeros(n_queries))
    worst_pure = max(float(np.max(np.abs(pure_hi.ln_gamma1))),
                     float(np.max(np.abs(pure_lo.ln_gamma2))))

    pseudo = predict_gammas(params, config, E1, E1, Ts, x1)
    worst_pseudo = max(float(np.max(np.abs(pseudo.ln_gamma1))),
                       float(np.max(np.abs(pseudo.ln_gamma2))))

    fwd = predict_slots(params, config, E1, x1, E2, 1.0 - x1, Ts)
    rev = predict_slots(params, config, E2, 1.0 - x1, E1, x1, Ts)
    worst_perm = max(
        float(np.max(np.abs(fwd.ln_gamma1 - rev.ln_gamma2))),
        float(np.max(np.abs(fwd.ln_gamma2 - rev.ln_gamma1))),
        float(np.max(np.abs(fwd.gE_over_RT - rev.gE_over_RT))),
    )
    bit_identical = (np.array_equal(fwd.ln_gamma1, rev.ln_gamma2)
                     and np.array_equal(fwd.ln_gamma2, rev.ln_gamma1)
                     and np.array_equal(fwd.gE_over_RT, rev.gE_over_RT))

    res = gibbs_duhem_residuals(params, config, E1, E2, Ts, x1, h)
    worst_gd = float(np.max(np.abs(res)))

    report = {
        "variant": config.variant,
        "n_queries": n_queries,
        "seed": seed,
        "h": h,
        "criteria": {
            "pure_limit": {"pass": worst_pure == 0.0, "worst_abs": worst_pure},
            "gibbs_duhem": {"pass": worst_gd < gd_tol, "worst_abs": worst_gd,
                             "msd": float(np.mean(res * res)), "tolerance": gd_tol},
            "pseudo_binary": {"pass": worst_pseudo == 0.0, "worst_abs": worst_pseudo},
            "permutation": {"pass": bool(bit_identical), "worst_abs": worst_perm},
        },
    }
    report["all_pass"] = all(c["pass"] for c in report["criteria"].values())
    return report


def write_certificate_json(path, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")


def write_cumulative_csv(path, maes, thresholds, baseline_maes=None) -> None:
    """Cumulative-share curve; the baseline column stays empty unless
    baseline MAEs are supplied."""
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=np.float64))
    fracs = cumulative_fraction(maes, thresholds)
    base = (cumulative_fraction(baseline_maes, thresholds)
            if baseline_maes is not None else None)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold", "fraction", "baseline_fraction"])
        for i, t in enumerate(thresholds):
            writer.writerow([
                f"{t:.17g}", f"{fracs[i]:.17g}",
                "" if base is None else f"{base[i]:.17g}",
            ])


def mae_histogram(maes, bin_width: float = 0.02):
    """Histogram of system MAEs with fixed-width bins from zero."""
    values = np.asarray(list(maes.values()) if isinstance(maes, dict) else maes,
                        dtype=np.float64)
    if values.size == 0:
        raise DataValidationError("mae_histogram needs at least one MAE")
    if bin_width <= 0:
        raise DataValidationError("bin width must be positive")
    n_bins = max(1, int(np.ceil(values.max() / bin_width)))
    edges = np.arange(n_bins + 1) * bin_width
    counts, _ = np.histogram(values, bins=edges)
    return edges, counts


def write_histogram_csv(path, maes, bin_width: float = 0.02) -> None:
    edges, counts = mae_histogram(maes, bin_width)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_lo", "bin_hi", "count"])
        for i, c in enumerate(counts):
            writer.writerow([f"{edges[i]:.17g}", f"{edges[i+1]:.17g}", str(int(c))])
