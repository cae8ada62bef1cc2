"""Command-line pipeline: gen, diag, train, eval.

Values resolve in three layers: built-in defaults, then a JSON config file
(``--config``), then explicit CLI flags.  The merged effective config is
echoed to the output directory before any work starts, and outputs carry no
timestamps, so a rerun with the same config and seed is byte-identical.

Exit codes: 0 success, 1 validation error, 2 runtime/capacity error,
3 data-format or I/O error.
"""

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .dataset import DatasetConfig, ObservableLabel, generate
from .dataset import load as load_dataset
from .diagnostics import (
    DIAGNOSTIC_KINDS,
    DiagConfig,
    correlator_samples,
    entropy_samples,
    magnetization_samples,
    otoc_samples,
)
from .errors import ScrambleError, ValidationError
from .figures import heatmap_figure, line_figure
from .gp import DEFAULT_AMPLITUDE, DEFAULT_CORRELATION_LENGTH
from .nn import NetworkConfig, load_model, save_model
from .training import (
    TrainConfig,
    _label_diff,
    evaluate,
    evaluate_size_extrapolation,
    paper_scale_preset,
    train,
    write_history_csv,
    write_observable_csv,
    write_report_csv,
)


class _Parser(argparse.ArgumentParser):
    # unknown flags and malformed values are validation errors (exit 1)
    def error(self, message):
        raise ValidationError(message)


def _add_common(sub):
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--config", help="JSON config file; flags override it")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--variant", choices=("I", "II"))
    sub.add_argument("--n", type=int, help="number of qubits")
    sub.add_argument("--depth", type=int, help="number of modules")
    sub.add_argument("--homogeneous", action="store_const", const=True,
                     help="one shared angle per module (default: per-qubit angles)")
    sub.add_argument("--amplitude", type=float, help="angle-process variance c0")
    sub.add_argument("--correlation-length", type=float,
                     help="angle-process correlation length")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scrambleml",
                     description="random-circuit datasets, diagnostics, and "
                                 "recurrent-network training")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="generate an observable-trace dataset")
    _add_common(gen)
    gen.add_argument("--samples", type=int, help="dataset sample count")
    gen.add_argument("--threads", type=int, default=1,
                     help="worker processes for sample simulation")
    gen.add_argument("--preset", choices=("paper",),
                     help="full-scale protocol (60k samples, N=8, P=40)")

    diag = commands.add_parser("diag", help="regime diagnostics as CSV + SVG")
    _add_common(diag)
    diag.add_argument("--diag", required=True, choices=DIAGNOSTIC_KINDS,
                      dest="kind", help="which diagnostic to run")
    diag.add_argument("--realizations", type=int)
    diag.add_argument("--theta", type=float,
                      help="fixed rotation angle instead of random draws")
    diag.add_argument("--axis", choices=("x", "y", "z"), help="otoc operator axis")
    diag.add_argument("--source-site", type=int, help="otoc source site")

    tr = commands.add_parser("train", help="fit a recurrent net to a dataset")
    tr.add_argument("--dataset", required=True, help="dataset directory")
    tr.add_argument("--out", required=True)
    tr.add_argument("--config", help="JSON config file; flags override it")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--batch-size", type=int)
    tr.add_argument("--learning-rate", type=float)
    tr.add_argument("--patience", type=int)
    tr.add_argument("--p-train", type=int,
                    help="train only on depths 1..p_train")
    tr.add_argument("--precision", choices=("float64", "float32"))
    tr.add_argument("--hidden", help="comma-separated layer widths, e.g. 64,64")
    tr.add_argument("--kernel-size", type=int)
    tr.add_argument("--padding", choices=("zero", "periodic"))
    tr.add_argument("--resume", help="model file to continue training from")
    tr.add_argument("--preset", choices=("paper",),
                    help="paper-size network stack")

    ev = commands.add_parser("eval", help="score a model on a dataset")
    ev.add_argument("--model", required=True, help="model file")
    ev.add_argument("--dataset", required=True, help="dataset directory")
    ev.add_argument("--out", required=True)
    ev.add_argument("--p-train", type=int,
                    help="override the interpolated/extrapolated boundary")
    ev.add_argument("--size-extrapolation", action="store_true",
                    help="match channels by label against a larger system")
    return parser


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")
    return obj


def _merge(defaults: dict, config: dict, flags: dict, section: str) -> dict:
    merged = dict(defaults)
    unknown = sorted(set(config) - set(defaults))
    if unknown:
        raise ValidationError(
            f"unknown keys in config section {section!r}: {unknown}")
    for source in (config, flags):
        for key, value in source.items():
            if value is not None:
                merged[key] = value
    return merged


def _echo_config(out_dir: Path, command: str, merged: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, **merged}
    (out_dir / "effective-config.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def _write_csv(path, header: list, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([row[0]] + [f"{v:.12g}" for v in row[1:]])


# ----------------------------------------------------------------- gen

def cmd_gen(args) -> int:
    file_cfg = _load_config_file(args.config).get("dataset", {})
    defaults = {"n_qubits": 8, "depth": 40, "variant": "I", "homogeneous": False,
                "sample_count": 100, "master_seed": 0,
                "amplitude": DEFAULT_AMPLITUDE,
                "correlation_length": DEFAULT_CORRELATION_LENGTH,
                "layer_order": "two_body_first"}
    if args.preset == "paper":
        preset = paper_scale_preset(args.variant or defaults["variant"],
                                    homogeneous=bool(args.homogeneous))
        defaults.update(asdict(preset["dataset"]))
    flags = {"n_qubits": args.n, "depth": args.depth, "variant": args.variant,
             "homogeneous": args.homogeneous, "sample_count": args.samples,
             "master_seed": args.seed, "amplitude": args.amplitude,
             "correlation_length": args.correlation_length}
    merged = _merge(defaults, file_cfg, flags, "dataset")
    config = DatasetConfig(**merged)

    out_dir = Path(args.out)
    _echo_config(out_dir, "gen", merged)
    dataset = generate(config, out_dir, threads=args.threads)
    print(f"wrote {len(dataset)} samples to {out_dir}")
    print(f"  N={config.n_qubits} P={config.depth} variant={config.variant} "
          f"{'homogeneous' if config.homogeneous else 'inhomogeneous'} "
          f"channels={len(config.labels())}")
    return 0


# ----------------------------------------------------------------- diag

def cmd_diag(args) -> int:
    file_cfg = _load_config_file(args.config).get("diag", {})
    axis = args.axis or file_cfg.pop("axis", "z")
    source_site = args.source_site or file_cfg.pop("source_site", None)
    defaults = {"n_qubits": 8, "depth": 40, "variant": "I", "realizations": 20,
                "seed": 0, "amplitude": DEFAULT_AMPLITUDE,
                "correlation_length": DEFAULT_CORRELATION_LENGTH,
                "homogeneous": False, "theta": None}
    flags = {"n_qubits": args.n, "depth": args.depth, "variant": args.variant,
             "realizations": args.realizations, "seed": args.seed,
             "amplitude": args.amplitude,
             "correlation_length": args.correlation_length,
             "homogeneous": args.homogeneous, "theta": args.theta}
    merged = _merge(defaults, file_cfg, flags, "diag")
    cfg = DiagConfig(**merged)

    out_dir = Path(args.out)
    _echo_config(out_dir, "diag",
                 {**merged, "kind": args.kind, "axis": axis,
                  "source_site": source_site})
    depths = np.arange(cfg.depth + 1)
    tag = f"N={cfg.n_qubits} variant {cfg.variant}"

    if args.kind == "magnetization":
        mz = magnetization_samples(cfg).mean(axis=0)
        _write_csv(out_dir / "magnetization.csv", ["depth", "m_z"],
                   zip(depths, mz))
        line_figure(out_dir / "magnetization.svg", depths, {"m_z": mz},
                    "depth p", "magnetization", tag)
    elif args.kind == "correlators":
        traces = correlator_samples(cfg).mean(axis=0)
        l_max = traces.shape[1]
        header = ["depth"] + [f"l{ell}" for ell in range(1, l_max + 1)]
        _write_csv(out_dir / "correlators.csv", header,
                   ((int(d), *row) for d, row in zip(depths, traces)))
        series = {f"l={ell}": traces[:, ell - 1] for ell in range(1, l_max + 1)}
        line_figure(out_dir / "correlators.svg", depths, series, "depth p",
                    "|connected z-z correlator|^2", tag, logy=True)
    elif args.kind == "entropies":
        samples = entropy_samples(cfg)
        vn = samples["von_neumann"].mean(axis=0)
        basis = samples["basis"].mean(axis=0)
        pt = np.full_like(vn, samples["pt"])
        _write_csv(out_dir / "entropies.csv",
                   ["depth", "von_neumann", "basis", "pt_ref"],
                   zip(depths, vn, basis, pt))
        line_figure(out_dir / "entropies.svg", depths,
                    {"von Neumann (half chain)": vn, "basis": basis},
                    "depth p", "entropy", tag,
                    hlines={"chaotic-limit reference": samples["pt"]})
    else:  # otoc
        field = otoc_samples(cfg, axis=axis, source_site=source_site).mean(axis=0)
        header = ["depth"] + [f"site_{j}" for j in range(1, cfg.n_qubits + 1)]
        _write_csv(out_dir / "otoc.csv", header,
                   ((int(d), *row) for d, row in zip(depths, field)))
        heatmap_figure(out_dir / "otoc.svg", field, "site", "depth p",
                       f"{axis}-{axis} commutator norm, {tag}")
    print(f"wrote {args.kind} diagnostics to {out_dir}")
    return 0


# ----------------------------------------------------------------- train

def _parse_hidden(text: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"--hidden expects comma-separated integers: {exc}") from exc


def cmd_train(args) -> int:
    file_cfg = _load_config_file(args.config)
    dataset = load_dataset(args.dataset)
    manifest = dataset.manifest
    k = len(manifest.labels)

    net_file = dict(file_cfg.get("network", {}))
    arch = "lstm" if manifest.homogeneous else "convlstm"
    if args.preset == "paper":
        base = (NetworkConfig.lstm_paper(k) if manifest.homogeneous
                else NetworkConfig.convlstm_paper(k))
        net_defaults = base.to_json()
    else:
        net_defaults = {"architecture": arch, "hidden_sizes": [64, 64],
                        "output_width": k, "in_features": 2, "kernel_size": 3,
                        "padding": "zero", "seed": 0, "precision": "float64"}
    net_flags = {"hidden_sizes": _parse_hidden(args.hidden) if args.hidden else None,
                 "kernel_size": args.kernel_size, "padding": args.padding,
                 "precision": args.precision, "seed": args.seed}
    net_merged = _merge(net_defaults, net_file, net_flags, "network")
    net_merged["architecture"] = arch  # dataset layout decides the stack
    net_merged["output_width"] = k
    net_merged["in_features"] = 2
    network = NetworkConfig.from_json(net_merged)

    train_file = dict(file_cfg.get("train", {}))
    train_defaults = {"epochs": 200, "batch_size": 64, "learning_rate": 1e-3,
                      "patience": 20, "seed": 0, "precision": "float64",
                      "p_train": None, "split_fractions": (0.9, 0.05, 0.05),
                      "clip_norm": 5.0}
    train_flags = {"epochs": args.epochs, "batch_size": args.batch_size,
                   "learning_rate": args.learning_rate, "patience": args.patience,
                   "seed": args.seed, "precision": args.precision,
                   "p_train": args.p_train}
    train_merged = _merge(train_defaults, train_file, train_flags, "train")
    cfg = TrainConfig(dataset=dataset, network=network, **train_merged)

    out_dir = Path(args.out)
    _echo_config(out_dir, "train",
                 {"dataset": str(args.dataset), "network": network.to_json(),
                  "resume": args.resume, **train_merged})
    initial = load_model(args.resume) if args.resume else None
    result = train(cfg, initial_state=initial)
    save_model(result.state, out_dir / "model.bin")
    write_history_csv(result.history, out_dir / "history.csv")
    print(f"trained {network.architecture} for {len(result.history)} epochs "
          f"({result.state.step} steps)")
    print(f"best validation mse {result.best_val_loss:.6g} "
          f"at epoch {result.best_epoch}")
    print(f"wrote model and history to {out_dir}")
    return 0


# ----------------------------------------------------------------- eval

def cmd_eval(args) -> int:
    state = load_model(args.model)
    dataset = load_dataset(args.dataset)
    out_dir = Path(args.out)
    _echo_config(out_dir, "eval",
                 {"model": str(args.model), "dataset": str(args.dataset),
                  "p_train": args.p_train,
                  "size_extrapolation": args.size_extrapolation})
    if args.size_extrapolation:
        report = evaluate_size_extrapolation(state, dataset, p_train=args.p_train)
    else:
        stored = [ObservableLabel.from_json(obj)
                  for obj in state.metadata.get("labels", [])]
        if stored and stored != dataset.manifest.labels:
            raise ValidationError(
                f"label mismatch between model and dataset: "
                f"{_label_diff(stored, dataset.manifest.labels)}")
        report = evaluate(state, dataset, p_train=args.p_train)
    write_report_csv(report, out_dir / "report.csv")
    write_observable_csv(report, out_dir / "observables.csv")
    depths = np.arange(1, len(report.per_depth) + 1)
    line_figure(out_dir / "report.svg", depths,
                {"per-depth mse": report.per_depth}, "depth p", "mse",
                "evaluation", logy=bool(np.all(report.per_depth > 0)))
    print(f"overall mse {report.overall:.6g} over "
          f"{report.realization_count} realizations")
    regions = set(report.regions)
    if "extrapolated" in regions:
        print(f"interpolated mse {report.interpolated_mse():.6g}; "
              f"extrapolated mse {report.extrapolated_mse():.6g}")
    print(f"wrote report to {out_dir}")
    return 0


# ----------------------------------------------------------------- main

_HANDLERS = {"gen": cmd_gen, "diag": cmd_diag, "train": cmd_train, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except ScrambleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
