"""Command-line subcommands.

Output layout of ``train --out DIR``::

    DIR/config.json               effective config (after DTKC_SEED)
    DIR/checkpoint/               loss-selected run
    DIR/runs/run_XXX/record.json  RunRecord per run
    DIR/runs/run_XXX/checkpoint/  parameters per completed run
    DIR/summary.json              selected run, and accuracy figures when labels exist

``viz-importance`` writes ``layer{L}_obs{i}.pgm`` grayscale maps plus
``importance.json``; the main-loss map (layer 0) is always exported next to
the requested layer.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from loguru import logger

from config.experiment import TrainConfig, load_train_config, save_train_config
from core.errors import ConfigError, DTKCError, NotAnImageDatasetError
from data.dataset import Dataset, load_dataset, save_dataset
from data.synthetic import make_synthetic_blob_images, make_synthetic_sequences
from diagnostics.cluster_grid import DEFAULT_PER_ROW, export_cluster_grid
from diagnostics.importance import MAIN_LOSS_LAYER, check_importance_layer, export_importance_maps, importance_map
from diagnostics.ofm import ofm_curves, write_ofm_report
from evaluation.aggregate import aggregate_runs
from evaluation.metrics import ClusteringResult
from evaluation.sweep import run_sweep, write_sweep
from networks.architecture import layer_summary
from tracking.audit_logger import EventType, get_audit_logger
from training.checkpoint import load_checkpoint_config, load_model, save_checkpoint
from training.records import RunRecord, load_run_record, save_run_record
from training.trainer import predict, train_multi


def _print_json(data: Dict[str, Any]) -> None:
    sys.stdout.write(json.dumps(data, indent=2, sort_keys=True) + "\n")
    sys.stdout.flush()


def _write_json(data: Dict[str, Any], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _parse_values(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid value list '{text}': {e}")


def _config_dataset(cfg: TrainConfig, config_path: Path) -> Dataset:
    """Load the config's dataset; relative paths resolve against the config's directory first."""
    if cfg.dataset is None:
        raise ConfigError("the config names no dataset", field="dataset")
    path = Path(cfg.dataset)
    if not path.is_absolute() and (config_path.parent / path).exists():
        path = config_path.parent / path
    return load_dataset(path)


def _save_run(record: RunRecord, run_dir: Path, cfg: TrainConfig) -> None:
    if record.params is not None:
        checkpoint_dir = save_checkpoint(
            record.params,
            run_dir / "checkpoint",
            config=cfg,
            architecture=record.architecture,
            input_shape=record.input_shape,
            n_clusters=record.n_clusters,
        )
        record.checkpoint = str(checkpoint_dir.relative_to(run_dir.parent.parent))
    save_run_record(record, run_dir / "record.json")


def cmd_train(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    cfg = load_train_config(config_path)
    dataset = _config_dataset(cfg, config_path)
    out_dir = Path(args.out)
    save_train_config(cfg, out_dir / "config.json")

    # Labels only feed the per-epoch accuracy columns, never the loss.
    best, records = train_multi(cfg, dataset, eval_labels=dataset.labels)
    for record in records:
        _save_run(record, out_dir / "runs" / f"run_{record.run_index:03d}", cfg)

    save_checkpoint(
        best.params,
        out_dir / "checkpoint",
        config=cfg,
        architecture=best.architecture,
        input_shape=best.input_shape,
        n_clusters=best.n_clusters,
    )

    summary: Dict[str, Any] = {
        "selected_run": best.run_index,
        "selected_loss": best.final_loss,
        "n_runs": len(records),
        "aborted_runs": [r.run_index for r in records if r.aborted],
        "layers": layer_summary(best.architecture, best.input_shape, best.n_clusters),
    }
    if dataset.labels is not None:
        aggregate = aggregate_runs(records, dataset)
        summary["accuracy"] = aggregate.to_dict()
        summary["selected_accuracy"] = aggregate.selected
    _write_json(summary, out_dir / "summary.json")
    get_audit_logger().export_session(out_dir / "audit_session.json")
    logger.info(f"Training output written to {out_dir}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    audit = get_audit_logger()
    op_id = audit.start_operation(
        EventType.EVALUATION, "evaluate checkpoint", parameters={"checkpoint": args.checkpoint, "data": args.data}
    )
    model = load_model(args.checkpoint)
    dataset = load_dataset(args.data)
    pred, _ = predict(model, dataset)
    report = ClusteringResult(predictions=pred, k=model.n_clusters, truth=dataset.labels).to_dict()
    audit.complete_operation(op_id, result=report)
    _print_json(report)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    cfg = load_train_config(config_path)
    dataset = _config_dataset(cfg, config_path)
    cells = run_sweep(cfg, args.param, args.values, dataset)
    write_sweep(cells, args.out)
    failed = [c.value for c in cells if c.failed]
    if failed:
        logger.warning(f"{len(failed)} sweep cell(s) failed: {failed}")
    return 0


def cmd_viz_importance(args: argparse.Namespace) -> int:
    model = load_model(args.checkpoint)
    cfg = load_checkpoint_config(args.checkpoint) or TrainConfig()
    dataset = load_dataset(args.data)
    if not dataset.is_image:
        raise NotAnImageDatasetError(f"dataset '{dataset.meta.name}' holds sequences, not images")

    count = min(args.count, dataset.n)
    dtype = next(model.parameters()).dtype
    images = dataset.inputs(np.arange(count), dtype=dtype)

    check_importance_layer(model, args.layer, cfg)
    layers = [args.layer] if args.layer == MAIN_LOSS_LAYER else [MAIN_LOSS_LAYER, args.layer]
    for layer in layers:
        maps = importance_map(model, images, layer, cfg)
        export_importance_maps(maps, args.out)
    get_audit_logger().log_event(
        EventType.DIAGNOSTIC, "importance maps", metadata={"layers": layers, "count": count, "out": args.out}
    )
    return 0


def cmd_viz_clusters(args: argparse.Namespace) -> int:
    model = load_model(args.checkpoint)
    dataset = load_dataset(args.data)
    export_cluster_grid(model, dataset, args.out, per_row=args.per_row)
    get_audit_logger().log_event(EventType.DIAGNOSTIC, "cluster grid", metadata={"out": args.out})
    return 0


def cmd_ofm(args: argparse.Namespace) -> int:
    run_path = Path(args.run)
    report = ofm_curves(load_run_record(run_path))
    write_ofm_report(report, run_path.parent / "ofm.json")
    _print_json(report.to_dict())
    return 0


def cmd_make_data(args: argparse.Namespace) -> int:
    if args.kind == "blobs":
        dataset = make_synthetic_blob_images(args.k, args.per_cluster, args.side, args.seed)
    else:
        if args.min_length > args.max_length:
            raise ConfigError("--min-length exceeds --max-length", field="min_length")
        dataset = make_synthetic_sequences(
            args.k, args.per_cluster, args.dim, (args.min_length, args.max_length), args.seed
        )
    save_dataset(dataset, args.out)
    get_audit_logger().log_event(
        EventType.DATASET, f"generated {dataset.meta.name}", metadata={"out": args.out, "n": dataset.n}
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtkc",
        description="Deep clustering with divergence-based objectives and tensor-kernel companion losses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Run the multi-run protocol and save checkpoints and run records")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", required=True, help="Output directory")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="Print accuracy, NMI and cluster sizes of a checkpoint as JSON")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="Dataset directory")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("sweep", help="Train and summarize once per parameter value")
    p.add_argument("--param", required=True, choices=["lambda", "rel_sigma", "sigma"])
    p.add_argument("--values", required=True, type=_parse_values, help="Comma-separated values")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser(
        "viz-importance",
        help="Write layer{L}_obs{i}.pgm importance maps and importance.json (layer 0 = main loss)",
    )
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--layer", required=True, type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=8, help="Number of observations (default: 8)")
    p.set_defaults(handler=cmd_viz_importance)

    p = sub.add_parser("viz-clusters", help="Write a PGM grid with one row per predicted cluster")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="Output .pgm file")
    p.add_argument("--per-row", type=int, default=DEFAULT_PER_ROW)
    p.set_defaults(handler=cmd_viz_clusters)

    p = sub.add_parser("ofm", help="Loss/accuracy correlation over epochs of one run record")
    p.add_argument("--run", required=True, help="record.json of a run trained with labels")
    p.set_defaults(handler=cmd_ofm)

    p = sub.add_parser("make-data", help="Generate a synthetic dataset")
    kinds = p.add_subparsers(dest="kind", required=True)
    for kind, help_text in (("blobs", "Gaussian blob images"), ("seqs", "Noisy sinusoid sequences")):
        q = kinds.add_parser(kind, help=help_text)
        q.add_argument("--out", required=True)
        q.add_argument("--k", type=int, default=3)
        q.add_argument("--per-cluster", type=int, default=50)
        q.add_argument("--seed", type=int, default=0)
        if kind == "blobs":
            q.add_argument("--side", type=int, default=16)
        else:
            q.add_argument("--dim", type=int, default=2)
            q.add_argument("--min-length", type=int, default=10)
            q.add_argument("--max-length", type=int, default=20)
        q.set_defaults(handler=cmd_make_data)

    return parser


def run_command(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv`` and dispatch. 0 = success, 2 = usage error, 1 = runtime error."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2

    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except DTKCError as e:
        logger.error(f"{args.command} failed: {type(e).__name__}: {e.message}")
        get_audit_logger().log_event(EventType.ERROR, f"{args.command} failed", metadata=e.to_dict())
        return 1
    except (ValueError, OSError, RuntimeError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
