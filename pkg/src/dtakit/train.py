"""Training loop: minibatch Adam on MSE, LR schedule, early stopping.

The learning rate starts at 3e-4 and drops to 1e-4 once 100 epochs have
completed.  Early stopping watches validation MSE (training MSE when no
validation split is given) and halts after more than ``patience``
consecutive non-improving epochs, keeping the best-epoch checkpoint.

Epoch logs are ``epoch,train_mse,valid_mse,lr,seconds`` rows and are
bit-reproducible for a fixed (seed, data, config) apart from the seconds
column.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .checkpoint import Checkpoint
from .data import featurize_records
from .model import AffinityModel, ModelConfig
from .optim import Adam

LOG_HEADER = "epoch,train_mse,valid_mse,lr,seconds"


@dataclass
class TrainConfig:
    lr_initial: float = 3e-4
    lr_after_100_epochs: float = 1e-4
    batch_size: int = 128
    max_epochs: int = 1000
    early_stop_patience: int = 200
    folds: int = 5
    seed: int = 0
    virtual_node: bool = True
    fusion_mode: str = "attention"
    target_train_mse: float | None = None  # optional convergence stop
    workers: int = 1

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be positive")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.early_stop_patience < 0:
            raise ValueError("early_stop_patience must be >= 0")


@dataclass
class EpochLog:
    epoch: int
    train_mse: float
    valid_mse: float
    lr: float
    seconds: float

    def to_csv_row(self):
        return (f"{self.epoch},{self.train_mse!r},{self.valid_mse!r},"
                f"{self.lr!r},{self.seconds:.3f}")


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    log: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def write_log(self, path):
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(LOG_HEADER + "\n")
            for row in self.log:
                handle.write(row.to_csv_row() + "\n")


def _epoch_lr(config: TrainConfig, epoch: int) -> float:
    return config.lr_initial if epoch <= 100 else config.lr_after_100_epochs


def train(records, model_config: ModelConfig, train_config: TrainConfig,
          valid_records=None) -> TrainResult:
    """Train on ``records``; validate on ``valid_records`` when given.

    Without a validation split, early stopping and checkpoint selection
    run on the training MSE (recomputed in eval mode each epoch).
    """
    if len(records) < 2:
        raise ValueError("need at least two records to train")
    model_config = replace(model_config,
                           use_virtual_node=train_config.virtual_node,
                           fusion_mode=train_config.fusion_mode)
    for idx, rec in enumerate(records):
        if not math.isfinite(rec.affinity):
            raise ValueError(f"record {idx} has no affinity; cannot train")

    train_samples = featurize_records(records, model_config,
                                      workers=train_config.workers)
    if valid_records is not None:
        valid_samples = featurize_records(valid_records, model_config,
                                          workers=train_config.workers)
    else:
        valid_samples = train_samples

    rng = np.random.default_rng(train_config.seed)
    model = AffinityModel(model_config, seed=train_config.seed)
    optimizer = Adam()

    best = math.inf
    best_epoch = 0
    best_snapshot = None
    since_best = 0
    stopped_early = False
    log: list[EpochLog] = []
    n = len(train_samples)

    for epoch in range(1, train_config.max_epochs + 1):
        start = time.perf_counter()
        lr = _epoch_lr(train_config, epoch)
        order = rng.permutation(n)
        sq_sum = 0.0
        for lo in range(0, n, train_config.batch_size):
            batch = [train_samples[i] for i in order[lo:lo + train_config.batch_size]]
            loss, grads = model.loss_and_grads(batch, train=True, rng=rng)
            optimizer.step(model.params, grads, lr)
            sq_sum += loss * len(batch)
        train_mse = sq_sum / n

        valid_pred = model.predict(valid_samples)
        valid_truth = np.asarray([s.target for s in valid_samples],
                                 dtype=np.float64)
        valid_mse = float(np.mean((valid_pred.astype(np.float64) - valid_truth) ** 2))
        seconds = time.perf_counter() - start
        log.append(EpochLog(epoch=epoch, train_mse=train_mse,
                            valid_mse=valid_mse, lr=lr, seconds=seconds))

        if valid_mse < best:
            best = valid_mse
            best_epoch = epoch
            since_best = 0
            best_snapshot = _snapshot(model, optimizer, rng, epoch, best)
        else:
            since_best += 1
            if since_best > train_config.early_stop_patience:
                stopped_early = True
                break
        if (train_config.target_train_mse is not None
                and train_mse < train_config.target_train_mse):
            break

    if best_snapshot is None:  # max_epochs reached without any improvement
        best_snapshot = _snapshot(model, optimizer, rng, len(log), best)
    return TrainResult(checkpoint=best_snapshot, log=log,
                       best_epoch=best_epoch, stopped_early=stopped_early)


def _snapshot(model, optimizer, rng, epoch, best_valid_mse) -> Checkpoint:
    return Checkpoint(
        config=model.config,
        params={k: v.copy() for k, v in model.params.items()},
        state={k: v.copy() for k, v in model.state.items()},
        moments={k: v.copy() for k, v in optimizer.state_arrays().items()},
        adam_step=optimizer.t,
        epoch=epoch,
        best_valid_mse=best_valid_mse,
        rng_state=rng.bit_generator.state,
    )


def model_from_checkpoint(ckpt: Checkpoint) -> AffinityModel:
    return AffinityModel.from_arrays(ckpt.config,
                                     {k: v.copy() for k, v in ckpt.params.items()},
                                     {k: v.copy() for k, v in ckpt.state.items()})


def predict_batch(ckpt: Checkpoint, records, workers: int = 1):
    """Eval-mode predictions for records; metrics when truth is present.

    Returns (predictions array, MetricsReport or None).
    """
    from .metrics import MetricsReport

    model = model_from_checkpoint(ckpt)
    samples = featurize_records(records, ckpt.config, workers=workers)
    if not samples:
        return np.zeros(0, dtype=np.float32), None
    if workers > 1:
        preds = _predict_sharded(model, samples, workers)
    else:
        preds = model.predict(samples)
    truths = np.asarray([s.target for s in samples], dtype=np.float64)
    report = None
    if len(samples) >= 2 and np.isfinite(truths).all():
        try:
            report = MetricsReport.compute(preds.astype(np.float64), truths)
        except ValueError:
            report = None
    return preds, report


def _predict_sharded(model, samples, workers):
    from concurrent.futures import ThreadPoolExecutor

    chunk = max(1, (len(samples) + workers - 1) // workers)
    shards = [samples[i:i + chunk] for i in range(0, len(samples), chunk)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(model.predict, shards))
    return np.concatenate(parts)
