"""Training orchestration plus the three headline evaluations.

``train`` runs minibatch Adam on the MSE between predicted and simulated
observable traces, early-stops on validation loss, and returns the
best-validation checkpoint.  ``evaluate`` reports MSE per depth (tagged
interpolated/extrapolated around the trained depth) and per observable.
``evaluate_size_extrapolation`` reuses a spatial (convlstm) model at larger
system sizes, matching target channels to the trained label list.
"""

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import Dataset, DatasetConfig, ObservableLabel, select_labels
from .dataset import load as load_dataset
from .dataset import split as split_dataset
from .errors import TrainingError, ValidationError
from .nn import AdamConfig, ModelState, Network, NetworkConfig, adam_step, loss_node

DEFAULT_SPLIT = (0.9, 0.05, 0.05)


@dataclass(frozen=True)
class TrainConfig:
    """One training run; dataset may be a directory path or a loaded Dataset."""

    dataset: object
    network: NetworkConfig
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    patience: int = 20
    seed: int = 0
    precision: str = "float64"
    split_fractions: tuple = DEFAULT_SPLIT
    p_train: int | None = None
    clip_norm: float | None = 5.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience < 0:
            raise ValidationError(f"patience must be >= 0, got {self.patience}")
        if self.p_train is not None and self.p_train < 1:
            raise ValidationError(f"p_train must be >= 1, got {self.p_train}")


@dataclass
class TrainResult:
    state: ModelState
    history: list
    best_epoch: int
    best_val_loss: float
    split_indices: tuple


def _resolve_dataset(dataset) -> Dataset:
    if isinstance(dataset, Dataset):
        return dataset
    return load_dataset(dataset)


def _check_compatibility(net_config: NetworkConfig, dataset: Dataset):
    manifest = dataset.manifest
    k = len(manifest.labels)
    if net_config.output_width != k:
        raise ValidationError(
            f"network output width {net_config.output_width} does not match "
            f"the dataset's {k} observable channels")
    want_rank = 3 if net_config.architecture == "lstm" else 4
    if dataset.inputs.ndim != want_rank:
        raise ValidationError(
            f"{net_config.architecture} expects rank-{want_rank} inputs "
            f"(got shape {dataset.inputs.shape}); homogeneous datasets feed "
            f"lstm, inhomogeneous feed convlstm")
    if dataset.inputs.shape[-1] != net_config.in_features:
        raise ValidationError(
            f"network expects {net_config.in_features} input features, dataset "
            f"provides {dataset.inputs.shape[-1]}")


def unfold_theta(inputs: np.ndarray) -> np.ndarray:
    """Return inputs with the angle channel in signed-kick coordinates.

    Stored angles live in [0, pi); a value above pi/2 is the fold image of
    the negative kick theta - pi (same gate up to a global phase).  Unfolding
    hands the network one smooth coordinate centered on zero instead of two
    clusters at the interval's ends.
    """
    out = np.array(inputs, dtype=float)
    theta = out[..., 0]
    out[..., 0] = np.where(theta > np.pi / 2, theta - np.pi, theta)
    return out


def _batched_predict(net: Network, params: dict, inputs: np.ndarray,
                     batch_size: int = 256) -> np.ndarray:
    chunks = [net.predict(params, inputs[i : i + batch_size])
              for i in range(0, len(inputs), batch_size)]
    if not chunks:
        p = inputs.shape[1] if inputs.ndim > 1 else 0
        return np.zeros((0, p, net.config.output_width))
    return np.concatenate(chunks)


def train(cfg: TrainConfig, initial_state: ModelState | None = None) -> TrainResult:
    dataset = _resolve_dataset(cfg.dataset)
    if initial_state is not None:
        net_config = initial_state.config  # resuming keeps the trained stack
        stored = [ObservableLabel.from_json(obj)
                  for obj in initial_state.metadata.get("labels", [])]
        if stored and stored != dataset.manifest.labels:
            raise ValidationError(
                f"label mismatch between checkpoint and dataset: "
                f"{_label_diff(stored, dataset.manifest.labels)}")
    else:
        net_config = replace(cfg.network, precision=cfg.precision)
    _check_compatibility(net_config, dataset)
    manifest = dataset.manifest
    p_train = cfg.p_train if cfg.p_train is not None else manifest.depth
    if p_train > manifest.depth:
        raise ValidationError(
            f"p_train {p_train} exceeds the dataset depth {manifest.depth}")

    inputs = unfold_theta(dataset.inputs[:, :p_train])
    targets = dataset.targets[:, :p_train]
    train_idx, val_idx, test_idx = split_dataset(dataset, cfg.split_fractions,
                                                 seed=cfg.seed)
    if len(train_idx) == 0:
        raise ValidationError("training split is empty")

    metadata = {
        "labels": [lb.to_json() for lb in manifest.labels],
        "p_train": int(p_train),
        "n_qubits": manifest.n_qubits,
        "homogeneous": manifest.homogeneous,
        "variant": manifest.variant,
        "dataset_depth": manifest.depth,
    }
    if initial_state is not None:
        state = initial_state
        state.metadata.update(metadata)
    else:
        state = ModelState.fresh(net_config, metadata=metadata)
    net = Network(net_config)
    opt = AdamConfig(learning_rate=cfg.learning_rate, clip_norm=cfg.clip_norm)
    rng = np.random.default_rng(cfg.seed)

    best_val = np.inf
    best_params = state.copy_params()
    best_epoch = 0
    bad_epochs = 0
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(train_idx)
        seen = 0
        loss_sum = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            node = loss_node(net, state.params, inputs[batch], targets[batch])
            if not np.isfinite(node.value):
                raise TrainingError(
                    f"non-finite training loss {node.value} at epoch {epoch}, "
                    f"batch starting at {start}")
            adam_step(state, node.backward(), opt)
            loss_sum += node.value * len(batch)
            seen += len(batch)
        train_loss = loss_sum / seen
        if len(val_idx):
            preds = _batched_predict(net, state.params, inputs[val_idx])
            diff = preds - targets[val_idx]
            val_loss = float(np.mean(diff * diff))
        else:
            val_loss = train_loss  # fall back when the split has no val slice
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "val_loss": val_loss})
        if val_loss < best_val:
            best_val = val_loss
            best_params = state.copy_params()
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience > 0:
                break
    state.params = best_params
    return TrainResult(state=state, history=history, best_epoch=best_epoch,
                       best_val_loss=best_val,
                       split_indices=(train_idx, val_idx, test_idx))


@dataclass(frozen=True)
class EvalReport:
    """MSE broken down by depth and by observable channel.

    ``overall`` is the mean of ``per_depth`` (equal weights, so it is also
    the grand mean over samples, depths, and channels).
    """

    per_depth: np.ndarray
    per_observable: np.ndarray
    overall: float
    realization_count: int
    regions: tuple
    label_names: tuple = ()

    def region_mse(self, region: str) -> float:
        mask = np.array([r == region for r in self.regions])
        if not mask.any():
            raise ValidationError(f"no depths tagged {region!r}")
        return float(self.per_depth[mask].mean())

    def interpolated_mse(self) -> float:
        return self.region_mse("interpolated")

    def extrapolated_mse(self) -> float:
        return self.region_mse("extrapolated")


def _report(preds: np.ndarray, targets: np.ndarray, p_train: int,
            label_names: tuple) -> EvalReport:
    sq = (preds - targets) ** 2
    per_depth = sq.mean(axis=(0, 2))
    per_observable = sq.mean(axis=(0, 1))
    regions = tuple("interpolated" if p <= p_train else "extrapolated"
                    for p in range(1, sq.shape[1] + 1))
    return EvalReport(per_depth=per_depth, per_observable=per_observable,
                      overall=float(per_depth.mean()),
                      realization_count=sq.shape[0], regions=regions,
                      label_names=tuple(label_names))


def evaluate(state: ModelState, dataset, p_train: int | None = None,
             indices=None) -> EvalReport:
    dataset = _resolve_dataset(dataset)
    net = Network(state.config)
    _check_compatibility(state.config, dataset)
    if p_train is None:
        p_train = int(state.metadata.get("p_train", dataset.manifest.depth))
    inputs = dataset.inputs if indices is None else dataset.inputs[indices]
    targets = dataset.targets if indices is None else dataset.targets[indices]
    if len(inputs) == 0:
        raise ValidationError("cannot evaluate on an empty dataset")
    preds = _batched_predict(net, state.params, unfold_theta(inputs))
    return _report(preds, targets, p_train, dataset.label_names)


def _label_diff(model_labels: list, dataset_labels: list) -> str:
    model_names = [lb.name for lb in model_labels]
    data_names = [lb.name for lb in dataset_labels]
    missing = [n for n in model_names if n not in data_names]
    extra = [n for n in data_names if n not in model_names]
    return (f"model labels missing from dataset: {missing or 'none'}; "
            f"dataset labels unused by model: {extra or 'none'}")


def evaluate_size_extrapolation(state: ModelState, dataset,
                                p_train: int | None = None) -> EvalReport:
    """Apply a spatial model to a (possibly larger) system size.

    Dataset target channels are matched to the model's trained label list;
    every trained label must exist at the new size.
    """
    if state.config.architecture != "convlstm":
        raise ValidationError(
            "size extrapolation needs the size-agnostic convlstm architecture, "
            f"not {state.config.architecture!r}")
    dataset = _resolve_dataset(dataset)
    model_labels = [ObservableLabel.from_json(obj)
                    for obj in state.metadata.get("labels", [])]
    if not model_labels:
        raise ValidationError("model carries no label metadata; cannot match channels")
    dataset_labels = dataset.manifest.labels
    positions = []
    for lb in model_labels:
        try:
            positions.append(dataset_labels.index(lb))
        except ValueError:
            raise ValidationError(
                f"label mismatch between model and dataset: "
                f"{_label_diff(model_labels, dataset_labels)}") from None
    if p_train is None:
        p_train = int(state.metadata.get("p_train", dataset.manifest.depth))
    net = Network(state.config)
    if dataset.inputs.ndim != 4 or dataset.inputs.shape[-1] != state.config.in_features:
        raise ValidationError(
            f"size extrapolation needs inhomogeneous (S, P, N, F) inputs, "
            f"got {dataset.inputs.shape}")
    if len(dataset.inputs) == 0:
        raise ValidationError("cannot evaluate on an empty dataset")
    preds = _batched_predict(net, state.params, unfold_theta(dataset.inputs))
    targets = dataset.targets[:, :, positions]
    return _report(preds, targets, p_train, [lb.name for lb in model_labels])


# ------------------------------------------------------------- CSV output

def write_history_csv(history: list, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for row in history:
            writer.writerow([row["epoch"], f"{row['train_loss']:.12g}",
                             f"{row['val_loss']:.12g}"])


def write_report_csv(report: EvalReport, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["depth", "region", "mse"])
        for p, (region, mse) in enumerate(zip(report.regions, report.per_depth), start=1):
            writer.writerow([p, region, f"{mse:.12g}"])


def write_observable_csv(report: EvalReport, path):
    names = report.label_names or tuple(
        f"channel_{k}" for k in range(len(report.per_observable)))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "mse"])
        for name, mse in zip(names, report.per_observable):
            writer.writerow([name, f"{mse:.12g}"])


# ------------------------------------------------------------- presets

def paper_scale_preset(variant: str, homogeneous: bool = True,
                       master_seed: int = 0) -> dict:
    """Full-scale protocol: N=8, P=40, 60k samples, paper-size networks.

    Far outside desk-test budgets; provided for complete reruns.
    """
    n_qubits = 8
    labels = select_labels(n_qubits, homogeneous)
    dataset = DatasetConfig(n_qubits=n_qubits, depth=40, variant=variant,
                            homogeneous=homogeneous, sample_count=60000,
                            master_seed=master_seed)
    if homogeneous:
        network = NetworkConfig.lstm_paper(len(labels))
    else:
        network = NetworkConfig.convlstm_paper(len(labels))
    return {"dataset": dataset, "network": network}
