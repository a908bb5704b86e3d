"""Objective, optimizer, cross-validated training loop, checkpoints.

The loss is the per-class binary cross-entropy over softmax outputs, with
probabilities clamped to [1e-7, 1 - 1e-7]. Adam uses the benchmark's
hyperparameters (lr 0.003, beta1 0.81, beta2 0.88) with standard bias
correction.

Checkpoints use a purpose-built container because zip-based formats embed
timestamps and break byte-exact round trips:

    bytes 0-3   magic b"QSPK"
    bytes 4-7   u32 big-endian version (currently 1)
    bytes 8-11  u32 big-endian length M of the meta block
    12 .. 12+M  meta JSON (sorted keys): model config, init seed, optimizer
                hyperparameters and step, and an array index of
                [name, dtype, shape] entries sorted by name
    then        each array's raw C-order bytes, in index order
"""

from __future__ import annotations

import copy
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset, kfold_splits
from .model import (MODES, ModelConfig, PROB_CLAMP, SpikingQuantumClassifier,
                    backward, forward)
from .vqc import VqcParams
from . import model as model_mod

CHECKPOINT_MAGIC = b"QSPK"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable checkpoint: wrong magic, version, or truncated payload."""


def cross_entropy(probs, target: int) -> float:
    """Sum over classes of the binary cross-entropy against a one-hot target."""
    z = np.asarray(probs, dtype=np.float64)
    if z.ndim != 1:
        raise ValueError("probs must be a 1-d simplex vector")
    if not 0 <= target < z.size:
        raise ValueError(f"target {target} out of range for {z.size} classes")
    zc = np.clip(z, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = -np.log(zc[target]) - np.sum(np.log(1.0 - np.delete(zc, target)))
    return float(loss)


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 0.003
    beta1: float = 0.81
    beta2: float = 0.88
    eps: float = 1e-8


@dataclass
class AdamState:
    config: AdamConfig
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def init(cls, params: dict[str, np.ndarray],
             config: AdamConfig | None = None) -> "AdamState":
        config = config or AdamConfig()
        return cls(
            config=config,
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update, in place on the parameter arrays."""
    if set(params) != set(state.m) or set(params) != set(grads):
        raise ValueError("params, grads, and optimizer state disagree on keys")
    c = state.config
    state.t += 1
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape} ({k})")
        state.m[k] = c.beta1 * state.m[k] + (1.0 - c.beta1) * g
        state.v[k] = c.beta2 * state.v[k] + (1.0 - c.beta2) * g * g
        m_hat = state.m[k] / (1.0 - c.beta1 ** state.t)
        v_hat = state.v[k] / (1.0 - c.beta2 ** state.t)
        p -= c.lr * m_hat / (np.sqrt(v_hat) + c.eps)
    return params, state


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    folds: int = 5
    seed: int = 0
    mode: str = "stochastic"
    adam: AdamConfig = field(default_factory=AdamConfig)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.folds < 1:
            raise ValueError("epochs, batch_size, and folds must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass(frozen=True)
class ReportRow:
    fold: int
    epoch: int
    split: str  # "train" or "val"
    loss: float
    accuracy: float


@dataclass
class TrainingReport:
    rows: list[ReportRow]
    best_fold: int
    best_epoch: int
    best_accuracy: float
    best_model: SpikingQuantumClassifier
    best_state: AdamState


def evaluate(net: SpikingQuantumClassifier, ds: Dataset,
             indices=None) -> tuple[float, float]:
    """Deterministic (expected-mode) mean loss and accuracy over indices."""
    if indices is None:
        indices = np.arange(len(ds))
    losses, hits = [], 0
    for idx in indices:
        probs, _ = forward(net, ds.images[idx], mode="expected")
        losses.append(cross_entropy(probs, int(ds.labels[idx])))
        hits += int(np.argmax(probs) == ds.labels[idx])
    n = len(indices)
    return float(np.mean(losses)) if n else 0.0, hits / n if n else 0.0


def fit(base: SpikingQuantumClassifier, ds: Dataset,
        cfg: TrainConfig) -> TrainingReport:
    """Cross-validated training.

    Each fold gets a fresh parameter init seeded from (seed, fold), then
    `epochs` passes over the training folds in reshuffled batches, scoring
    the held-out fold after every epoch. The best model is the highest
    validation accuracy seen (first one on ties). `folds=1` degenerates to
    training and validating on the full set, handy for overfit smoke tests.
    Whole runs are deterministic per seed; in `expected` mode even the
    forward passes are.
    """
    if len(ds) == 0:
        raise ValueError("empty dataset")
    if ds.images.shape[1] != base.config.in_dim:
        raise ValueError(
            f"dataset pixels {ds.images.shape[1]} != model input {base.config.in_dim}")
    if cfg.folds == 1:
        everything = np.arange(len(ds))
        splits = [(everything, everything)]
    else:
        plan = kfold_splits(len(ds), cfg.folds, cfg.seed)
        splits = [(plan.train_indices(f), plan.val_indices(f))
                  for f in range(cfg.folds)]
    rows: list[ReportRow] = []
    best = None
    for fold, (tr, va) in enumerate(splits):
        net = SpikingQuantumClassifier.build(
            base.config, np.random.default_rng([cfg.seed, fold]), seed=cfg.seed)
        state = AdamState.init(net.parameters(), cfg.adam)
        for epoch in range(cfg.epochs):
            rng = np.random.default_rng([cfg.seed, fold, epoch])
            order = tr[rng.permutation(tr.size)]
            losses, hits = [], 0
            for start in range(0, order.size, cfg.batch_size):
                batch = order[start:start + cfg.batch_size]
                params = net.parameters()
                acc_grads = {k: np.zeros_like(p) for k, p in params.items()}
                for idx in batch:
                    target = int(ds.labels[idx])
                    probs, cache = forward(net, ds.images[idx], rng, cfg.mode)
                    losses.append(cross_entropy(probs, target))
                    hits += int(np.argmax(probs) == target)
                    for k, g in backward(net, cache, target).items():
                        acc_grads[k] += g
                for k in acc_grads:
                    acc_grads[k] /= batch.size
                adam_step(params, acc_grads, state)
            rows.append(ReportRow(fold, epoch, "train",
                                  float(np.mean(losses)), hits / order.size))
            val_loss, val_acc = evaluate(net, ds, va)
            rows.append(ReportRow(fold, epoch, "val", val_loss, val_acc))
            if best is None or val_acc > best[2]:
                best = (fold, epoch, val_acc, copy.deepcopy(net),
                        copy.deepcopy(state))
    return TrainingReport(rows=rows, best_fold=best[0], best_epoch=best[1],
                          best_accuracy=best[2], best_model=best[3],
                          best_state=best[4])


def write_report_csv(report: TrainingReport, path) -> None:
    with open(path, "w") as f:
        f.write("fold,epoch,split,loss,accuracy\n")
        for r in report.rows:
            f.write(f"{r.fold},{r.epoch},{r.split},{r.loss:.6f},{r.accuracy:.6f}\n")


def _checkpoint_arrays(net: SpikingQuantumClassifier,
                       state: AdamState | None) -> dict[str, np.ndarray]:
    arrays = dict(net.parameters())
    if state is not None:
        for k, arr in state.m.items():
            arrays[f"adam.m.{k}"] = arr
        for k, arr in state.v.items():
            arrays[f"adam.v.{k}"] = arr
    return arrays


def save_checkpoint(net: SpikingQuantumClassifier, state: AdamState | None,
                    path) -> None:
    arrays = _checkpoint_arrays(net, state)
    index = [[name, arrays[name].dtype.str, list(arrays[name].shape)]
             for name in sorted(arrays)]
    meta = {
        "config": asdict(net.config),
        "seed": net.seed,
        "adam": None if state is None else {**asdict(state.config), "t": state.t},
        "arrays": index,
    }
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack(">II", CHECKPOINT_VERSION, len(blob)))
        f.write(blob)
        for name, _, _ in index:
            f.write(np.ascontiguousarray(arrays[name]).tobytes())


def load_checkpoint(path) -> tuple[SpikingQuantumClassifier, AdamState | None]:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    if len(raw) < 12:
        raise CheckpointError(f"{path}: truncated header")
    version, meta_len = struct.unpack(">II", raw[4:12])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    if len(raw) < 12 + meta_len:
        raise CheckpointError(f"{path}: truncated meta block")
    try:
        meta = json.loads(raw[12:12 + meta_len])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt meta block: {exc}") from None
    arrays: dict[str, np.ndarray] = {}
    offset = 12 + meta_len
    for name, dtype, shape in meta["arrays"]:
        n_bytes = int(np.dtype(dtype).itemsize * np.prod(shape, dtype=np.int64))
        chunk = raw[offset:offset + n_bytes]
        if len(chunk) != n_bytes:
            raise CheckpointError(f"{path}: truncated array {name!r}")
        arrays[name] = np.frombuffer(chunk, dtype=dtype).reshape(shape).copy()
        offset += n_bytes
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")

    def dense(prefix: str) -> model_mod.DenseLayer:
        return model_mod.DenseLayer(
            arrays[f"{prefix}.weights"], arrays[f"{prefix}.bias"])

    try:
        cfg = ModelConfig(**meta["config"])
        theta = arrays.get("circuit.theta")
        circuit = (VqcParams(cfg.n_qubits, cfg.n_layers, theta)
                   if theta is not None
                   else VqcParams.zeros(cfg.n_qubits, cfg.n_layers))
        net = SpikingQuantumClassifier(
            config=cfg, l1=dense("l1"), l2=dense("l2"),
            pre_input=dense("pre_input"), circuit=circuit, head=dense("head"),
            sub=dense("sub") if cfg.head_kind == "classical" else None,
            seed=int(meta["seed"]))
        state = None
        if meta["adam"] is not None:
            admeta = dict(meta["adam"])
            t = admeta.pop("t")
            names = list(net.parameters())
            state = AdamState(
                config=AdamConfig(**admeta), t=t,
                m={k: arrays[f"adam.m.{k}"] for k in names},
                v={k: arrays[f"adam.v.{k}"] for k in names},
            )
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing tensor or field {exc}") from None
    return net, state
