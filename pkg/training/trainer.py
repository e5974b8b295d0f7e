"""Mini-batch training of DDC / DTKC models and the multi-run protocol."""

import time
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
from loguru import logger
from torch import Tensor

from config.experiment import ArchitectureSpec, TrainConfig
from config.settings import settings
from core.companion import CompanionWeights, ObjectiveBreakdown, total_objective
from core.errors import AllRunsFailedError, ConfigError, NonFiniteInputError, NonFiniteLossError
from data.dataset import Dataset, load_dataset
from evaluation.metrics import hungarian_accuracy, nmi
from networks.architecture import default_cnn_architecture, default_rnn_architecture
from networks.model import DDCModel, build_model, forward_inputs, model_params
from networks.taps import SequenceBatch
from tracking.audit_logger import EventType, get_audit_logger
from training.records import EpochStats, RunRecord

Inputs = Union[Tensor, SequenceBatch]


def resolve_architecture(cfg: TrainConfig, dataset: Dataset) -> ArchitectureSpec:
    """The configured architecture, or the default one for the dataset kind."""
    if cfg.architecture is not None:
        expected = "cnn" if dataset.is_image else "rnn"
        if cfg.architecture.kind != expected:
            raise ConfigError(
                f"a {dataset.meta.kind} dataset needs a {expected} architecture, got {cfg.architecture.kind}",
                field="architecture",
            )
        return cfg.architecture
    if dataset.is_image:
        return default_cnn_architecture(dataset.meta.input_shape, resolve_n_clusters(cfg, dataset))
    return default_rnn_architecture()


def resolve_n_clusters(cfg: TrainConfig, dataset: Dataset) -> int:
    return cfg.n_clusters if cfg.n_clusters is not None else dataset.meta.k


def objective_on(model: DDCModel, inputs: Inputs, cfg: TrainConfig) -> ObjectiveBreakdown:
    """Forward ``inputs`` and evaluate the full training objective."""
    out = forward_inputs(model, inputs)
    return total_objective(
        out.taps,
        out.hidden,
        out.assignments,
        CompanionWeights.from_config(cfg),
        cfg.kernel,
        term_weights=cfg.term_weights,
    )


def evaluate_objective(model: DDCModel, inputs: Inputs, cfg: TrainConfig) -> ObjectiveBreakdown:
    """Objective in eval mode without gradients (used for the per-epoch history)."""
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            return objective_on(model, inputs, cfg)
    finally:
        model.train(was_training)


def predict(model: DDCModel, dataset: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """Hard labels (argmax of A) and the assignment matrix over the full dataset."""
    dtype = next(model.parameters()).dtype
    was_training = model.training
    model.eval()
    chunks = []
    try:
        with torch.no_grad():
            for start in range(0, dataset.n, settings.predict_batch_size):
                index = np.arange(start, min(start + settings.predict_batch_size, dataset.n))
                chunks.append(forward_inputs(model, dataset.inputs(index, dtype=dtype)).assignments)
    finally:
        model.train(was_training)
    assignments = torch.cat(chunks).cpu().numpy()
    return assignments.argmax(axis=1).astype(np.int64), assignments


def _labeled_scores(
    model: DDCModel, dataset: Dataset, eval_labels: Optional[np.ndarray], k: int
) -> Tuple[Optional[float], Optional[float]]:
    if eval_labels is None:
        return None, None
    pred, _ = predict(model, dataset)
    return hungarian_accuracy(pred, eval_labels, k), nmi(pred, eval_labels)


def _epoch_stats(
    epoch: int,
    model: DDCModel,
    eval_inputs: Inputs,
    cfg: TrainConfig,
    dataset: Dataset,
    eval_labels: Optional[np.ndarray],
    k: int,
) -> EpochStats:
    stats = EpochStats.from_breakdown(epoch, evaluate_objective(model, eval_inputs, cfg))
    stats.accuracy, stats.nmi = _labeled_scores(model, dataset, eval_labels, k)
    return stats


def non_finite_gradients(model: nn.Module) -> List[str]:
    """Names of parameters whose gradient holds NaN or Inf values."""
    return [
        name for name, p in model.named_parameters()
        if p.grad is not None and not torch.isfinite(p.grad).all()
    ]


def _aborted(reason: str, step: int, epoch: int, run_index: int, record: RunRecord) -> NonFiniteLossError:
    return NonFiniteLossError(
        f"{reason} at step {step} (epoch {epoch}) of run {run_index}",
        step=step,
        epoch=epoch,
        history=record.history,
    )


def train_one_run(
    cfg: TrainConfig,
    dataset: Dataset,
    run_seed: int,
    eval_labels: Optional[np.ndarray] = None,
    run_index: int = 0,
) -> RunRecord:
    """Train one model from ``run_seed``.

    ``eval_labels`` only feed the accuracy/NMI columns of the history; the
    loss never sees them. The history is measured in eval mode on the first
    ``batch_size`` observations, in dataset order, after every epoch.
    Trailing batches with fewer than two observations are skipped.
    """
    if dataset.n < 1:
        raise ConfigError("dataset is empty", field="dataset")
    if cfg.batch_size > dataset.n:
        raise ConfigError(f"batch_size {cfg.batch_size} exceeds dataset size {dataset.n}", field="batch_size")

    started = time.perf_counter()
    k = resolve_n_clusters(cfg, dataset)
    spec = resolve_architecture(cfg, dataset)
    model = build_model(spec, dataset.meta.input_shape, k, seed=run_seed)
    model.train()

    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    generator = torch.Generator().manual_seed(run_seed)
    eval_inputs = dataset.inputs(np.arange(cfg.batch_size))

    record = RunRecord(
        run_index=run_index,
        seed=run_seed,
        architecture=spec,
        input_shape=tuple(dataset.meta.input_shape),
        n_clusters=k,
    )

    step = 0
    for epoch in range(cfg.epochs):
        order = torch.randperm(dataset.n, generator=generator).numpy()
        for start in range(0, dataset.n, cfg.batch_size):
            index = order[start:start + cfg.batch_size]
            if len(index) < 2:
                continue

            try:
                loss = objective_on(model, dataset.inputs(index), cfg).total
            except NonFiniteInputError as e:
                raise _aborted(f"non-finite forward values ({e.message})", step, epoch, run_index, record) from e
            if not torch.isfinite(loss):
                raise _aborted("non-finite loss", step, epoch, run_index, record)

            optimizer.zero_grad()
            loss.backward()
            bad = non_finite_gradients(model)
            if bad:
                raise _aborted(f"non-finite gradients in {', '.join(bad)}", step, epoch, run_index, record)
            optimizer.step()
            step += 1

        try:
            stats = _epoch_stats(epoch, model, eval_inputs, cfg, dataset, eval_labels, k)
        except NonFiniteInputError as e:
            raise _aborted(f"non-finite evaluation ({e.message})", step, epoch, run_index, record) from e
        record.history.append(stats)
        logger.debug(
            f"run {run_index} epoch {epoch}: loss={stats.total_loss:.6f}"
            + (f" acc={stats.accuracy:.4f}" if stats.accuracy is not None else "")
        )

    if record.history:
        record.final_loss = record.history[-1].total_loss
    else:
        record.final_loss = float(evaluate_objective(model, eval_inputs, cfg).total.item())

    record.params = model_params(model)
    record.wall_clock_s = time.perf_counter() - started
    return record


def select_best(records: Sequence[RunRecord]) -> RunRecord:
    """Lowest final loss among completed runs; ties go to the lower run index."""
    completed = [r for r in records if not r.aborted]
    if not completed:
        raise AllRunsFailedError(f"all {len(records)} runs aborted")
    return min(completed, key=lambda r: (r.final_loss, r.run_index))


def train_multi(
    cfg: TrainConfig,
    dataset: Optional[Dataset] = None,
    eval_labels: Optional[np.ndarray] = None,
) -> Tuple[RunRecord, List[RunRecord]]:
    """Run ``cfg.n_runs`` independent runs with seeds ``seed + i`` and select the best by loss."""
    if dataset is None:
        if cfg.dataset is None:
            raise ConfigError("no dataset given and the config names none", field="dataset")
        dataset = load_dataset(cfg.dataset)

    audit = get_audit_logger()
    multi_id = audit.start_operation(
        EventType.MULTI_RUN,
        f"{cfg.n_runs} runs on '{dataset.meta.name}'",
        parameters={"seed": cfg.seed, "lambda": cfg.companion_lambda, "n_runs": cfg.n_runs},
    )
    logger.info(f"Training {cfg.n_runs} run(s) on '{dataset.meta.name}' with lambda={cfg.companion_lambda}")

    records: List[RunRecord] = []
    for i in range(cfg.n_runs):
        run_seed = cfg.seed + i
        run_id = audit.start_operation(
            EventType.TRAIN_RUN, f"run {i}", parameters={"seed": run_seed}, parent_id=multi_id
        )
        try:
            record = train_one_run(cfg, dataset, run_seed, eval_labels=eval_labels, run_index=i)
        except KeyboardInterrupt:
            audit.cancel_operation(run_id, "interrupted")
            audit.cancel_operation(multi_id, f"interrupted during run {i}")
            raise
        except NonFiniteLossError as e:
            logger.warning(f"Run {i} aborted: {e.message}")
            audit.fail_operation(run_id, e.message, metadata={"step": e.step, "epoch": e.epoch})
            records.append(RunRecord(
                run_index=i,
                seed=run_seed,
                history=list(e.history),
                aborted_step=e.step,
                error=e.message,
            ))
            continue

        audit.complete_operation(
            run_id,
            result={"final_loss": record.final_loss},
            metadata={"wall_clock_s": record.wall_clock_s},
        )
        logger.info(f"Run {i} (seed {run_seed}) finished with loss {record.final_loss:.6f}")
        records.append(record)

    try:
        best = select_best(records)
    except AllRunsFailedError as e:
        audit.fail_operation(multi_id, e.message)
        raise

    audit.complete_operation(multi_id, result={"best_run": best.run_index, "best_loss": best.final_loss})
    logger.info(f"Selected run {best.run_index} with loss {best.final_loss:.6f}")
    return best, records


def model_from_record(record: RunRecord) -> DDCModel:
    """Rebuild the trained model held in memory by ``record``."""
    if record.params is None or record.architecture is None:
        raise ConfigError(f"run {record.run_index} carries no parameters", field="params")
    model = build_model(record.architecture, record.input_shape, record.n_clusters, seed=record.seed)
    model.load_state_dict(record.params)
    model.eval()
    return model
