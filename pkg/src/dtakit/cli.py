"""Command-line interface: featurize / train / predict / evaluate / gradcheck.

Exit codes: 0 success, 1 runtime failure (single-line reason on stderr),
2 usage error.  Train flags mirror TrainConfig field names one-to-one; a
plain key=value config file can set any flag or ModelConfig field, with
the command line taking precedence.  ``--preset toy`` selects the small
architecture used by the smoke and gradient-check suites.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .data import kfold_split, load_dataset
from .gradcheck import model_gradcheck
from .metrics import MetricsReport
from .model import ModelConfig
from .molgraph import build_graph
from .protein import encode_sequence
from .smiles import parse_smiles
from .train import TrainConfig, predict_batch, train


def _read_config_file(path):
    values = {}
    for line_no, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _coerce(text, example):
    if isinstance(example, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(example, tuple):
        kind = type(example[0]) if example else int
        return tuple(kind(v) for v in text.split(","))
    if example is None:
        return float(text)
    return type(example)(text)


def _build_configs(args):
    """Merge defaults < config file < command line into the two configs."""
    file_values = _read_config_file(args.config) if args.config else {}

    model_config = ModelConfig.toy() if args.preset == "toy" else ModelConfig()
    model_overrides = {}
    for f in fields(ModelConfig):
        if f.name in file_values:
            model_overrides[f.name] = _coerce(file_values[f.name],
                                              getattr(model_config, f.name))
    if model_overrides:
        model_config = model_config.replace(**model_overrides)

    train_config = TrainConfig()
    train_values = {}
    for f in fields(TrainConfig):
        if f.name in file_values:
            train_values[f.name] = _coerce(file_values[f.name],
                                           getattr(train_config, f.name))
        cli_value = getattr(args, f.name, None)
        if cli_value is not None:
            train_values[f.name] = cli_value
    if args.no_virtual_node:
        train_values["virtual_node"] = False
    if args.fusion is not None:
        train_values["fusion_mode"] = args.fusion
    train_config = TrainConfig(**{**train_config.__dict__, **train_values})
    model_config = model_config.replace(
        use_virtual_node=train_config.virtual_node,
        fusion_mode=train_config.fusion_mode)
    return model_config, train_config


def _cmd_featurize(args):
    if not args.smiles and not args.fasta:
        print("featurize needs --smiles and/or --fasta", file=sys.stderr)
        return 2
    if args.smiles:
        mol = parse_smiles(args.smiles)
        graph = build_graph(mol, use_virtual_node=not args.no_virtual_node,
                            k_pe=args.k_pe)
        print(f"smiles={args.smiles}")
        print(f"atoms={mol.n_atoms}")
        print(f"bonds={mol.n_bonds}")
        print(f"nodes={graph.n_nodes}")
        print(f"directed_edges={graph.n_edges}")
        print(f"virtual_node_index={graph.virtual_node_index}")
        print(f"node_feature_dim={graph.node_features.shape[1]}")
        print(f"edge_feature_dim={graph.edge_features.shape[1]}")
        print(f"positional_encoding_shape={graph.positional_encoding.shape}")
    if args.fasta:
        enc = encode_sequence(args.fasta, max_len=args.l_p)
        print(f"protein_original_length={enc.original_length}")
        print(f"protein_encoded_length={enc.codes.shape[0]}")
        print(f"protein_nonzero={int((enc.codes != 0).sum())}")
    return 0


def _cmd_train(args):
    model_config, train_config = _build_configs(args)
    records, quarantine = load_dataset(args.data)
    for entry in quarantine:
        print(f"quarantined row {entry.row}: {entry.reason}", file=sys.stderr)
    if not records:
        print("no usable records", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    splits = kfold_split(records, train_config.folds, train_config.seed)
    for fold, (train_idx, valid_idx) in enumerate(splits):
        result = train([records[i] for i in train_idx], model_config,
                       train_config,
                       valid_records=[records[i] for i in valid_idx])
        ckpt_path = out_dir / f"fold{fold}.ckpt"
        log_path = out_dir / f"fold{fold}.log.csv"
        save_checkpoint(result.checkpoint, ckpt_path)
        result.write_log(log_path)
        print(f"fold={fold} best_epoch={result.best_epoch} "
              f"best_valid_mse={result.checkpoint.best_valid_mse:.6f} "
              f"epochs_run={len(result.log)} checkpoint={ckpt_path}")
    return 0


def _cmd_predict(args):
    ckpt = load_checkpoint(args.checkpoint)
    records, quarantine = load_dataset(args.data)
    for entry in quarantine:
        print(f"quarantined row {entry.row}: {entry.reason}", file=sys.stderr)
    preds, report = predict_batch(ckpt, records, workers=args.workers)
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write("smiles,protein,affinity,space,prediction\n")
        for rec, pred in zip(records, preds):
            affinity = "" if np.isnan(rec.affinity) else repr(float(rec.affinity))
            handle.write(f"{rec.smiles},{rec.protein_seq},{affinity},"
                         f"{rec.affinity_space},{float(pred)!r}\n")
    print(f"wrote {len(records)} predictions to {args.out}")
    if report is not None:
        print(report.to_text())
    return 0


def _cmd_evaluate(args):
    ckpt = load_checkpoint(args.checkpoint)
    records, quarantine = load_dataset(args.data)
    for entry in quarantine:
        print(f"quarantined row {entry.row}: {entry.reason}", file=sys.stderr)
    _, report = predict_batch(ckpt, records, workers=args.workers)
    if report is None:
        print("no metrics: need >= 2 records with finite affinities",
              file=sys.stderr)
        return 1
    if args.format == "csv":
        print(MetricsReport.CSV_HEADER)
        print(report.to_csv_row())
    else:
        print(report.to_text())
    return 0


def _cmd_gradcheck(args):
    report = model_gradcheck(seed=args.seed, eps=args.eps)
    print(f"checked_parameters={report.n_params}")
    print(f"max_relative_error={report.max_rel_error:.3e}")
    print(f"worst_parameter={report.worst_param}")
    print(f"seconds={report.seconds:.1f}")
    return 0 if report.passed(args.tolerance) else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dtakit",
        description="Drug-target affinity prediction toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", help="print graph/encoding stats")
    p.add_argument("--smiles")
    p.add_argument("--fasta")
    p.add_argument("--no-virtual-node", action="store_true")
    p.add_argument("--k-pe", type=int, default=8)
    p.add_argument("--l-p", type=int, default=1000)
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", help="k-fold training on a dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="key=value file for any train/model field")
    p.add_argument("--preset", choices=("full", "toy"), default="full")
    p.add_argument("--lr-initial", dest="lr_initial", type=float)
    p.add_argument("--lr-after-100-epochs", dest="lr_after_100_epochs", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--early-stop-patience", dest="early_stop_patience", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--target-train-mse", dest="target_train_mse", type=float)
    p.add_argument("--no-virtual-node", action="store_true")
    p.add_argument("--fusion", choices=("attention", "add", "concat"))
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="write a predictions CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="print metrics for a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=_cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # single-line reason, exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
