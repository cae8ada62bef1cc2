import csv

import numpy as np
import pytest

from scrambleml.dataset import (
    Dataset,
    DatasetConfig,
    DatasetManifest,
    generate,
    select_labels,
)
from scrambleml.errors import ValidationError
from scrambleml.nn import Network, NetworkConfig
from scrambleml.training import (
    EvalReport,
    TrainConfig,
    evaluate,
    evaluate_size_extrapolation,
    paper_scale_preset,
    train,
    unfold_theta,
    write_history_csv,
    write_observable_csv,
    write_report_csv,
)


def synthetic_dataset(n=4, depth=6, samples=60, homogeneous=True, seed=0,
                      targets=None):
    """In-memory dataset with plausible inputs and arbitrary targets."""
    rng = np.random.default_rng(seed)
    labels = select_labels(n, homogeneous)
    depth_channel = np.broadcast_to(np.arange(1.0, depth + 1)[:, None],
                                    (depth, 1))
    if homogeneous:
        theta = rng.uniform(0, np.pi, size=(samples, depth, 1))
        inputs = np.concatenate(
            [theta, np.broadcast_to(depth_channel, (samples, depth, 1))], axis=-1)
    else:
        theta = rng.uniform(0, np.pi, size=(samples, depth, n, 1))
        grid = np.broadcast_to(depth_channel[:, :, None], (depth, 1, n))
        depth_feat = np.broadcast_to(grid.transpose(0, 2, 1), (samples, depth, n, 1))
        inputs = np.concatenate([theta, depth_feat], axis=-1)
    if targets is None:
        targets = rng.uniform(-1, 1, size=(samples, depth, len(labels)))
    manifest = DatasetManifest(
        n_qubits=n, depth=depth, variant="I", homogeneous=homogeneous,
        sample_count=samples, master_seed=seed, amplitude=0.01,
        correlation_length=1.0, layer_order="two_body_first",
        labels=labels, tensors={})
    return Dataset(manifest=manifest, inputs=inputs, targets=np.asarray(targets))


def small_net(dataset, hidden=(6,), **overrides):
    arch = "lstm" if dataset.manifest.homogeneous else "convlstm"
    args = dict(architecture=arch, hidden_sizes=hidden,
                output_width=len(dataset.manifest.labels), in_features=2, seed=1)
    args.update(overrides)
    return NetworkConfig(**args)


def test_single_epoch_history():
    ds = synthetic_dataset(samples=10)
    result = train(TrainConfig(dataset=ds, network=small_net(ds), epochs=1,
                               batch_size=4, seed=3))
    assert len(result.history) == 1
    assert np.isfinite(result.history[0]["train_loss"])
    assert np.isfinite(result.history[0]["val_loss"])
    assert result.state.step > 0


def test_learns_constant_targets():
    # a bias-only fit suffices, so the net must reach tiny validation MSE
    ds = synthetic_dataset(samples=60, targets=None)
    const = np.full_like(ds.targets, 0.3)
    ds = Dataset(manifest=ds.manifest, inputs=ds.inputs, targets=const)
    cfg = TrainConfig(dataset=ds, network=small_net(ds), epochs=50, batch_size=8,
                      learning_rate=1e-2, patience=0, seed=5)
    result = train(cfg)
    assert result.best_val_loss < 1e-4


def test_training_deterministic():
    ds = synthetic_dataset(samples=24)
    cfg = TrainConfig(dataset=ds, network=small_net(ds), epochs=3, batch_size=8,
                      seed=11)
    a = train(cfg)
    b = train(cfg)
    assert a.history == b.history
    assert all(np.array_equal(a.state.params[k], b.state.params[k])
               for k in a.state.params)


def test_best_checkpoint_restored():
    ds = synthetic_dataset(samples=40)
    cfg = TrainConfig(dataset=ds, network=small_net(ds), epochs=12, batch_size=8,
                      patience=0, seed=2)
    result = train(cfg)
    # recomputing the val loss of the returned parameters gives best_val_loss
    _, val_idx, _ = result.split_indices
    net = Network(result.state.config)
    preds = net.predict(result.state.params, unfold_theta(ds.inputs[val_idx]))
    val = float(np.mean((preds - ds.targets[val_idx]) ** 2))
    assert abs(val - result.best_val_loss) < 1e-12
    assert result.best_epoch == min(
        range(1, len(result.history) + 1),
        key=lambda e: result.history[e - 1]["val_loss"])


def test_early_stopping_halts():
    # random targets cannot be fit, so validation stalls and patience trips
    ds = synthetic_dataset(samples=40, seed=9)
    cfg = TrainConfig(dataset=ds, network=small_net(ds, hidden=(3,)), epochs=200,
                      batch_size=8, patience=3, seed=4)
    result = train(cfg)
    assert len(result.history) < 200


def test_shape_mismatches_rejected():
    ds = synthetic_dataset()
    bad_k = small_net(ds)
    bad_k = NetworkConfig(architecture="lstm", hidden_sizes=(4,),
                          output_width=len(ds.manifest.labels) + 1, in_features=2)
    with pytest.raises(ValidationError, match="output width"):
        train(TrainConfig(dataset=ds, network=bad_k, epochs=1))
    conv = NetworkConfig(architecture="convlstm", hidden_sizes=(4,),
                         output_width=len(ds.manifest.labels), in_features=2)
    with pytest.raises(ValidationError, match="rank"):
        train(TrainConfig(dataset=ds, network=conv, epochs=1))
    with pytest.raises(ValidationError, match="p_train"):
        train(TrainConfig(dataset=ds, network=small_net(ds), epochs=1, p_train=99))


def test_perfect_model_scores_zero():
    ds = synthetic_dataset(samples=12)
    result = train(TrainConfig(dataset=ds, network=small_net(ds), epochs=1,
                               batch_size=6, seed=7))
    net = Network(result.state.config)
    preds = net.predict(result.state.params, unfold_theta(ds.inputs))
    mirrored = Dataset(manifest=ds.manifest, inputs=ds.inputs, targets=preds)
    report = evaluate(result.state, mirrored)
    assert report.overall == 0.0
    assert np.all(report.per_depth == 0.0)
    assert np.all(report.per_observable == 0.0)
    assert report.realization_count == 12


def test_report_regions_partition_depths():
    ds = synthetic_dataset(depth=8, samples=10)
    result = train(TrainConfig(dataset=ds, network=small_net(ds), epochs=1,
                               batch_size=4, p_train=5, seed=1))
    report = evaluate(result.state, ds)
    assert report.regions == ("interpolated",) * 5 + ("extrapolated",) * 3
    assert abs(report.overall - report.per_depth.mean()) < 1e-15
    assert report.interpolated_mse() >= 0.0
    assert report.extrapolated_mse() >= 0.0
    # trained on the full depth -> nothing extrapolated
    full = evaluate(result.state, ds, p_train=8)
    assert set(full.regions) == {"interpolated"}
    with pytest.raises(ValidationError):
        full.extrapolated_mse()


def test_size_extrapolation_consistency_and_mismatch():
    ds6 = synthetic_dataset(n=6, depth=4, samples=14, homogeneous=False, seed=3)
    cfg = TrainConfig(dataset=ds6, network=small_net(ds6, hidden=(3,)), epochs=1,
                      batch_size=4, seed=8)
    result = train(cfg)
    same = evaluate_size_extrapolation(result.state, ds6)
    plain = evaluate(result.state, ds6)
    assert np.allclose(same.per_depth, plain.per_depth, atol=0, rtol=0)
    # larger size: every trained label exists, channels get matched by name
    ds8 = synthetic_dataset(n=8, depth=4, samples=6, homogeneous=False, seed=4)
    bigger = evaluate_size_extrapolation(result.state, ds8)
    assert bigger.per_observable.shape == (len(ds6.manifest.labels),)
    assert bigger.realization_count == 6
    # shrinking the label set the other way must fail with a readable diff
    cfg8 = TrainConfig(dataset=ds8, network=small_net(ds8, hidden=(3,)), epochs=1,
                       batch_size=4, seed=8)
    result8 = train(cfg8)
    with pytest.raises(ValidationError, match="label mismatch"):
        evaluate_size_extrapolation(result8.state, ds6)


def test_size_extrapolation_requires_convlstm():
    ds = synthetic_dataset(samples=8)
    result = train(TrainConfig(dataset=ds, network=small_net(ds), epochs=1,
                               batch_size=4))
    with pytest.raises(ValidationError, match="size-agnostic"):
        evaluate_size_extrapolation(result.state, ds)


def test_generated_dataset_end_to_end(tmp_path):
    config = DatasetConfig(n_qubits=4, depth=5, variant="II", homogeneous=True,
                           sample_count=30, master_seed=21)
    generate(config, tmp_path / "ds")
    net = NetworkConfig(architecture="lstm", hidden_sizes=(5,),
                        output_width=len(config.labels()), in_features=2, seed=0)
    result = train(TrainConfig(dataset=str(tmp_path / "ds"), network=net,
                               epochs=2, batch_size=8, seed=1))
    report = evaluate(result.state, str(tmp_path / "ds"))
    assert report.per_depth.shape == (5,)
    assert np.all(report.per_depth >= 0.0)


def test_csv_writers(tmp_path):
    ds = synthetic_dataset(samples=10, depth=4)
    result = train(TrainConfig(dataset=ds, network=small_net(ds), epochs=2,
                               batch_size=4, p_train=3, seed=6))
    report = evaluate(result.state, ds)
    write_history_csv(result.history, tmp_path / "history.csv")
    write_report_csv(report, tmp_path / "report.csv")
    write_observable_csv(report, tmp_path / "obs.csv")
    with open(tmp_path / "history.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "train_loss", "val_loss"]
    assert len(rows) == len(result.history) + 1
    with open(tmp_path / "report.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["depth", "region", "mse"]
    assert [r[1] for r in rows[1:]] == ["interpolated"] * 3 + ["extrapolated"]
    with open(tmp_path / "obs.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[1][0] == "first_s1_x"
    assert len(rows) == len(ds.manifest.labels) + 1


def test_paper_preset_shapes():
    preset = paper_scale_preset("II", homogeneous=True)
    assert preset["dataset"].sample_count == 60000
    assert preset["dataset"].depth == 40
    assert preset["network"].hidden_sizes == (200, 200, 200)
    assert preset["network"].output_width == 30
    conv = paper_scale_preset("I", homogeneous=False)
    assert conv["network"].hidden_sizes == (70, 100, 100, 70)
    assert conv["network"].output_width == 39
