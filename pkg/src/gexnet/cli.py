"""Command-line interface.

Commands: featurize, synth, train, predict, vle, audit.  Exit codes:
0 success, 1 audit or validation failure, 2 usage error, 3 I/O error.
Every command is deterministic given its flags and seeds.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import data as data_mod
from . import descriptors as desc_mod
from . import evaluate as eval_mod
from . import model as model_mod
from . import thermo as thermo_mod
from . import train as train_mod
from .errors import GexnetError

__all__ = ["builtin_components", "main"]


class _UsageError(Exception):
    pass


def builtin_components(n: int) -> list[str]:
    """Deterministic pool of simple valid SMILES: alkanes, alcohols,
    amines, chlorides, ethers, and alkylbenzenes of growing chain length."""
    if n < 1:
        raise _UsageError("component count must be at least 1")
    out = []
    for i in range(n):
        k = 1 + i // 6
        chain = "C" * k
        family = i % 6
        if family == 0:
            out.append(chain)
        elif family == 1:
            out.append(chain + "O")
        elif family == 2:
            out.append(chain + "N")
        elif family == 3:
            out.append(chain + "Cl")
        elif family == 4:
            out.append(chain + "OC")
        else:
            out.append(chain + "c1ccccc1")
    return out


def _read_smiles_file(path) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def _fmt(v: float) -> str:
    return f"{v + 0.0:.17g}"  # v + 0.0 turns -0.0 into 0.0, leaves all else exact


def _write_rows(out_path, header: list[str], rows) -> None:
    import csv

    if out_path is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)


# ---------------------------------------------------------------------------
# featurize
# ---------------------------------------------------------------------------


def _cmd_featurize(args) -> int:
    smiles = _read_smiles_file(args.smiles_file)
    if not smiles:
        raise _UsageError("SMILES file is empty")
    if args.from_embeddings is not None:
        table = desc_mod.load_descriptor_table(args.from_embeddings)
        if args.dim is not None and table.dim != args.dim:
            raise GexnetError(
                f"embedding file has dim {table.dim}, expected {args.dim}"
            )
        missing = [s for s in smiles if s not in table]
        if missing:
            raise GexnetError(
                "embedding file is missing SMILES: " + ", ".join(map(repr, missing))
            )
        sub = desc_mod.DescriptorTable(dim=table.dim, source=table.source,
                                       seed=table.seed)
        for s in smiles:
            if s in sub.vectors:
                raise GexnetError(f"duplicate SMILES {s!r} in input list")
            sub.vectors[s] = table[s]
        desc_mod.write_descriptor_table(args.out, sub)
        print(f"validated {len(sub)} descriptors (dim {sub.dim}) -> {args.out}")
        return 0
    dim = args.dim if args.dim is not None else desc_mod.DEFAULT_DESCRIPTOR_DIM
    table = desc_mod.DescriptorTable(dim=dim, source="builtin-featurizer",
                                     seed=args.seed)
    for lineno, s in enumerate(smiles, start=1):
        try:
            if s in table.vectors:
                raise GexnetError(f"duplicate SMILES {s!r}")
            table.vectors[s] = desc_mod.featurize(s, dim, args.seed).vector
        except GexnetError as exc:
            raise GexnetError(f"SMILES line {lineno}: {exc}") from None
    desc_mod.write_descriptor_table(args.out, table)
    print(f"featurized {len(table)} SMILES (dim {dim}) -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def _cmd_synth(args) -> int:
    smiles = builtin_components(args.components)
    table = desc_mod.build_feature_table(smiles, args.dim, args.feature_seed)
    T_grid = [float(t) for t in args.t_grid.split(",") if t]
    x_grid = np.linspace(0.05, 0.95, args.x_points)
    records = thermo_mod.synthesize_dataset(
        table, args.oracle, T_grid, x_grid, args.noise, args.seed
    )
    data_mod.write_dataset_csv(args.out, records)
    if args.smiles_out is not None:
        with open(args.smiles_out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(smiles) + "\n")
    n_systems = len({r.system_id for r in records})
    print(f"wrote {len(records)} records over {n_systems} systems -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _parse_config_file(path) -> dict:
    overrides = {}
    field_types = {f.name: f.type for f in dataclasses.fields(train_mod.TrainConfig)}
    casts = {"lr0": float, "lr_decay_factor": float, "smoothl1_beta": float,
             "weight_decay": float, "lr_patience": int, "early_stop_patience": int,
             "batch_size": int, "max_epochs": int, "seed": int}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise _UsageError(f"config line {lineno}: expected key=value")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in field_types:
                raise _UsageError(f"config line {lineno}: unknown key {key!r}")
            try:
                overrides[key] = casts[key](value.strip())
            except ValueError:
                raise _UsageError(
                    f"config line {lineno}: bad value for {key}"
                ) from None
    return overrides


def _cmd_train(args) -> int:
    table = desc_mod.load_descriptor_table(args.descriptors)
    records = data_mod.ingest_csv(args.data)
    overrides = _parse_config_file(args.config) if args.config else {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.max_epochs is not None:
        overrides["max_epochs"] = args.max_epochs
    tconfig = train_mod.TrainConfig(**overrides)
    arch = model_mod.ArchitectureConfig(
        descriptor_dim=table.dim, hidden=args.hidden, variant=args.variant
    )
    split = data_mod.SplitSpec(seed=tconfig.seed)
    train_recs, val_recs, test_recs = data_mod.split_systems(records, split)
    missing = sorted({
        s for r in records for s in (r.smiles_1, r.smiles_2) if s not in table
    })
    if missing:
        raise GexnetError(
            "descriptor table is missing components: " + ", ".join(map(repr, missing))
        )
    os.makedirs(args.outdir, exist_ok=True)
    result = train_mod.fit(train_recs, val_recs, table, arch, tconfig)
    with open(os.path.join(args.outdir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump({
            "architecture": dataclasses.asdict(arch),
            "train": dataclasses.asdict(tconfig),
            "split": dataclasses.asdict(split),
            "n_train_records": len(train_recs),
            "n_val_records": len(val_recs),
            "n_test_records": len(test_recs),
        }, fh, indent=2)
    train_mod.write_metrics_csv(os.path.join(args.outdir, "metrics.csv"),
                                result.history)
    metadata = {
        "variant": arch.variant,
        "best_epoch": result.best_epoch,
        "best_val_loss": result.best_val_loss,
        "stop_reason": result.stop_reason,
        "descriptor_source": table.source,
        "descriptor_seed": table.seed,
    }
    model_mod.save_checkpoint(
        os.path.join(args.outdir, "checkpoint.json"),
        result.params, arch, result.stats, tconfig.seed, metadata,
    )
    print(f"best epoch {result.best_epoch}, val loss {result.best_val_loss:.6g}, "
          f"{len(result.history)} epochs run -> {args.outdir}")
    if result.diverged:
        print(f"training diverged: {result.stop_reason}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# predict / vle
# ---------------------------------------------------------------------------


def _checkpoint_vectors(args, ckpt) -> tuple[np.ndarray, np.ndarray]:
    if args.descriptors is not None:
        table = desc_mod.load_descriptor_table(args.descriptors)
        if table.dim != ckpt.config.descriptor_dim:
            raise GexnetError(
                f"descriptor table dim {table.dim} does not match checkpoint "
                f"dim {ckpt.config.descriptor_dim}"
            )
        missing = [s for s in (args.smiles1, args.smiles2) if s not in table]
        if missing:
            raise GexnetError(
                "descriptor table is missing SMILES: " + ", ".join(map(repr, missing))
            )
        return table[args.smiles1], table[args.smiles2]
    seed = ckpt.metadata.get("descriptor_seed")
    if seed is None:
        seed = desc_mod.DEFAULT_FEATURIZER_SEED
    dim = ckpt.config.descriptor_dim
    return (desc_mod.featurize(args.smiles1, dim, seed).vector,
            desc_mod.featurize(args.smiles2, dim, seed).vector)


def _predict_grid(args, ckpt):
    v1, v2 = _checkpoint_vectors(args, ckpt)
    if args.x1 is not None:
        x = np.array([args.x1], dtype=np.float64)
    else:
        x = np.linspace(0.0, 1.0, args.grid)
    E1 = data_mod.apply_standardizer(ckpt.stats, v1)
    E2 = data_mod.apply_standardizer(ckpt.stats, v2)
    Tstar = data_mod.standardize_temperature(ckpt.stats, args.T)
    pred = model_mod.predict_gammas(ckpt.params, ckpt.config, E1, E2,
                                    float(Tstar), x)
    return x, pred


def _cmd_predict(args) -> int:
    ckpt = model_mod.load_checkpoint(args.checkpoint)
    x, pred = _predict_grid(args, ckpt)
    rows = [
        [_fmt(x[i]), _fmt(pred.gE_over_RT[i]), _fmt(pred.ln_gamma1[i]),
         _fmt(pred.ln_gamma2[i])]
        for i in range(len(x))
    ]
    _write_rows(args.out, ["x1", "gE_over_RT", "ln_gamma_1", "ln_gamma_2"], rows)
    return 0


def _cmd_vle(args) -> int:
    ckpt = model_mod.load_checkpoint(args.checkpoint)
    antoine = thermo_mod.load_antoine_table(args.antoine)
    missing = [s for s in (args.smiles1, args.smiles2) if s not in antoine]
    if missing:
        raise GexnetError(
            "Antoine table is missing SMILES: " + ", ".join(map(repr, missing))
        )
    a1, a2 = antoine[args.smiles1], antoine[args.smiles2]
    p1S = thermo_mod.antoine_pressure(a1, args.T)
    p2S = thermo_mod.antoine_pressure(a2, args.T)
    x, pred = _predict_grid(args, ckpt)
    rows = []
    for i in range(len(x)):
        g1 = math.exp(pred.ln_gamma1[i])
        g2 = math.exp(pred.ln_gamma2[i])
        p, y1 = thermo_mod.bubble_point_isothermal(float(x[i]), g1, g2, p1S, p2S)
        rows.append([
            _fmt(x[i]), _fmt(pred.gE_over_RT[i]), _fmt(pred.ln_gamma1[i]),
            _fmt(pred.ln_gamma2[i]), _fmt(p.value), _fmt(y1),
        ])
    unit = p1S.unit
    _write_rows(args.out, ["x1", "gE_over_RT", "ln_gamma_1", "ln_gamma_2",
                           f"p_{unit}", "y1"], rows)
    return 0


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------


def _cmd_audit(args) -> int:
    ckpt = model_mod.load_checkpoint(args.checkpoint)
    report = eval_mod.consistency_certificate(
        ckpt.params, ckpt.config, n_queries=args.samples, seed=args.seed
    )
    for name, crit in report["criteria"].items():
        status = "PASS" if crit["pass"] else "FAIL"
        print(f"{name}: {status} (worst |residual| {crit['worst_abs']:.3g})")
    print("overall:", "PASS" if report["all_pass"] else "FAIL")
    return 0 if report["all_pass"] else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gexnet",
        description="Hard-constraint neural excess Gibbs energy models "
                    "for binary mixtures",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", help="build or validate a descriptor table")
    p.add_argument("--smiles-file", required=True)
    p.add_argument("--dim", type=int, default=None,
                   help="descriptor dimension (default 384)")
    p.add_argument("--seed", type=int, default=desc_mod.DEFAULT_FEATURIZER_SEED,
                   help="featurizer hash seed (default %(default)s)")
    p.add_argument("--out", required=True)
    p.add_argument("--from-embeddings", default=None,
                   help="validate and pass through an external embedding CSV")
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--components", type=int, default=20)
    p.add_argument("--oracle", choices=["margules", "nrtl", "mixed"], default="mixed")
    p.add_argument("--noise", type=float, default=0.0, help="ln gamma noise sigma")
    p.add_argument("--seed", type=int, default=10)
    p.add_argument("--dim", type=int, default=desc_mod.DEFAULT_DESCRIPTOR_DIM)
    p.add_argument("--feature-seed", type=int,
                   default=desc_mod.DEFAULT_FEATURIZER_SEED)
    p.add_argument("--t-grid", default="298.15,323.15,348.15",
                   help="comma-separated temperatures in K")
    p.add_argument("--x-points", type=int, default=21,
                   help="number of interior compositions per isotherm")
    p.add_argument("--out", required=True)
    p.add_argument("--smiles-out", default=None,
                   help="also write the component SMILES list")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", required=True)
    p.add_argument("--descriptors", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="split/init/shuffle seed (default 10)")
    p.add_argument("--variant", choices=list(model_mod.VARIANTS), default="hanna")
    p.add_argument("--hidden", type=int, default=96,
                   help="nodes per hidden layer (default %(default)s)")
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--config", default=None,
                   help="key=value file overriding training defaults "
                        "(lr0 0.0005, batch_size 512, smoothl1_beta 0.25, "
                        "weight_decay 1e-06, lr_patience 10, early_stop_patience 30)")
    p.set_defaults(func=_cmd_train)

    for name in ("predict", "vle"):
        p = sub.add_parser(name, help=f"{name} for one binary system")
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--smiles1", required=True)
        p.add_argument("--smiles2", required=True)
        p.add_argument("--T", type=float, required=True, help="temperature in K")
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--x1", type=float)
        group.add_argument("--grid", type=int)
        p.add_argument("--descriptors", default=None,
                       help="descriptor table covering both SMILES "
                            "(default: built-in featurizer)")
        p.add_argument("--out", default=None, help="output CSV (default stdout)")
        if name == "vle":
            p.add_argument("--antoine", required=True,
                           help="CSV smiles,A,B,C,Tmin_K,Tmax_K,unit")
            p.set_defaults(func=_cmd_vle)
        else:
            p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("audit", help="run the consistency certificate")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_audit)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "audit" and args.samples < 1:
        parser.error("--samples must be at least 1")
    if args.command == "predict" or args.command == "vle":
        if args.grid is not None and args.grid < 2:
            parser.error("--grid must be at least 2")
    if args.command == "synth" and args.x_points < 1:
        parser.error("--x-points must be at least 1")
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.error(str(exc))
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    except GexnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
