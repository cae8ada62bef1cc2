import csv
import json

import numpy as np
import pytest

from scrambleml.cli import main
from scrambleml.dataset import load as load_dataset
from scrambleml.nn import load_model


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def gen_tiny(tmp_path, name="ds", n=3, depth=3, samples=12, variant="I",
             homogeneous=True, seed=5):
    out = tmp_path / name
    argv = ["gen", "--out", str(out), "--n", str(n), "--depth", str(depth),
            "--samples", str(samples), "--variant", variant, "--seed", str(seed)]
    if homogeneous:
        argv.append("--homogeneous")
    assert main(argv) == 0
    return out


# ----------------------------------------------------------------- gen

def test_gen_writes_dataset(tmp_path, capsys):
    out = gen_tiny(tmp_path)
    dataset = load_dataset(out)
    assert len(dataset) == 12
    assert "wrote 12 samples" in capsys.readouterr().out
    echo = json.loads((out / "effective-config.json").read_text())
    assert echo["command"] == "gen"
    assert echo["n_qubits"] == 3
    assert echo["master_seed"] == 5


def test_gen_idempotent(tmp_path):
    a = gen_tiny(tmp_path, "a")
    b = gen_tiny(tmp_path, "b")
    for name in ("manifest.json", "inputs.bin", "targets.bin"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_gen_rejects_small_system(tmp_path, capsys):
    rc = main(["gen", "--out", str(tmp_path / "x"), "--n", "2", "--depth", "3",
               "--samples", "1"])
    assert rc == 1
    assert "n_qubits" in capsys.readouterr().err


def test_unknown_flag_is_error(tmp_path, capsys):
    rc = main(["gen", "--out", str(tmp_path / "x"), "--frobnicate", "1"])
    assert rc == 1


def test_missing_required_flag_is_error(capsys):
    assert main(["gen"]) == 1


def test_gen_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(
        {"dataset": {"n_qubits": 4, "depth": 2, "variant": "II",
                     "homogeneous": True, "sample_count": 3}}))
    out = tmp_path / "from-config"
    assert main(["gen", "--out", str(out), "--config", str(cfg),
                 "--samples", "5"]) == 0
    dataset = load_dataset(out)
    assert dataset.manifest.n_qubits == 4
    assert dataset.manifest.variant == "II"
    assert len(dataset) == 5  # flag wins over file


def test_gen_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"dataset": {"qubits": 4}}))
    rc = main(["gen", "--out", str(tmp_path / "x"), "--config", str(cfg)])
    assert rc == 1
    assert "unknown keys" in capsys.readouterr().err


# ----------------------------------------------------------------- diag

def test_diag_magnetization_frozen_angle(tmp_path):
    out = tmp_path / "mag"
    rc = main(["diag", "--diag", "magnetization", "--out", str(out), "--n", "4",
               "--depth", "5", "--variant", "I", "--theta", "0"])
    assert rc == 0
    rows = read_csv(out / "magnetization.csv")
    assert rows[0] == ["depth", "m_z"]
    assert len(rows) == 7  # depths 0..5
    for row in rows[1:]:
        assert abs(float(row[1]) - 1.0) < 1e-9
    svg = (out / "magnetization.svg").read_bytes()
    assert svg.startswith(b"<?xml")


def test_diag_svg_deterministic(tmp_path):
    argv = ["diag", "--diag", "magnetization", "--n", "3", "--depth", "3",
            "--variant", "II", "--realizations", "2", "--seed", "3"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    assert ((tmp_path / "a" / "magnetization.svg").read_bytes()
            == (tmp_path / "b" / "magnetization.svg").read_bytes())
    assert ((tmp_path / "a" / "magnetization.csv").read_bytes()
            == (tmp_path / "b" / "magnetization.csv").read_bytes())


def test_diag_otoc_frozen_angle_all_zero(tmp_path):
    out = tmp_path / "otoc"
    rc = main(["diag", "--diag", "otoc", "--out", str(out), "--n", "4",
               "--depth", "4", "--variant", "I", "--theta", "0", "--axis", "z"])
    assert rc == 0
    rows = read_csv(out / "otoc.csv")
    assert rows[0][0] == "depth"
    field = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    assert np.max(field) < 1e-12
    assert (out / "otoc.svg").exists()


def test_diag_otoc_capacity_bound(tmp_path, capsys):
    rc = main(["diag", "--diag", "otoc", "--out", str(tmp_path / "x"),
               "--n", "12", "--depth", "2", "--realizations", "1"])
    assert rc == 2
    assert "exceeds" in capsys.readouterr().err


def test_diag_entropies_include_reference(tmp_path):
    out = tmp_path / "ent"
    rc = main(["diag", "--diag", "entropies", "--out", str(out), "--n", "4",
               "--depth", "3", "--variant", "II", "--realizations", "2"])
    assert rc == 0
    rows = read_csv(out / "entropies.csv")
    assert rows[0] == ["depth", "von_neumann", "basis", "pt_ref"]
    ref = 4 * np.log(2) - 1 - np.euler_gamma
    assert all(abs(float(r[3]) - ref) < 1e-9 for r in rows[1:])


def test_diag_correlators(tmp_path):
    out = tmp_path / "corr"
    rc = main(["diag", "--diag", "correlators", "--out", str(out), "--n", "5",
               "--depth", "3", "--variant", "I", "--realizations", "2"])
    assert rc == 0
    rows = read_csv(out / "correlators.csv")
    assert rows[0] == ["depth", "l1", "l2"]
    assert (out / "correlators.svg").exists()


# ----------------------------------------------------------------- train/eval

def test_train_eval_round_trip(tmp_path, capsys):
    ds = gen_tiny(tmp_path, samples=14)
    run = tmp_path / "run"
    rc = main(["train", "--dataset", str(ds), "--out", str(run),
               "--epochs", "2", "--batch-size", "4", "--hidden", "4", "--seed", "1"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "best validation mse" in out
    assert (run / "model.bin").exists()
    history = read_csv(run / "history.csv")
    assert history[0] == ["epoch", "train_loss", "val_loss"]
    assert len(history) == 3

    ev = tmp_path / "ev"
    rc = main(["eval", "--model", str(run / "model.bin"), "--dataset", str(ds),
               "--out", str(ev)])
    assert rc == 0
    report = read_csv(ev / "report.csv")
    assert report[0] == ["depth", "region", "mse"]
    assert [r[1] for r in report[1:]] == ["interpolated"] * 3
    assert (ev / "observables.csv").exists()
    assert (ev / "report.svg").exists()


def test_train_resume_continues_steps(tmp_path):
    ds = gen_tiny(tmp_path, samples=10)
    first = tmp_path / "first"
    assert main(["train", "--dataset", str(ds), "--out", str(first),
                 "--epochs", "1", "--batch-size", "5", "--hidden", "3"]) == 0
    steps_before = load_model(first / "model.bin").step
    second = tmp_path / "second"
    assert main(["train", "--dataset", str(ds), "--out", str(second),
                 "--epochs", "1", "--batch-size", "5", "--hidden", "3",
                 "--resume", str(first / "model.bin")]) == 0
    assert load_model(second / "model.bin").step > steps_before


def test_train_missing_dataset(tmp_path, capsys):
    rc = main(["train", "--dataset", str(tmp_path / "nope"),
               "--out", str(tmp_path / "x"), "--epochs", "1"])
    assert rc == 3
    assert "manifest" in capsys.readouterr().err


def test_eval_label_mismatch_diff(tmp_path, capsys):
    ds3 = gen_tiny(tmp_path, "d3", n=3, samples=10)
    ds5 = gen_tiny(tmp_path, "d5", n=5, samples=6)
    run = tmp_path / "m3"
    assert main(["train", "--dataset", str(ds3), "--out", str(run),
                 "--epochs", "1", "--batch-size", "4", "--hidden", "3"]) == 0
    rc = main(["eval", "--model", str(run / "model.bin"), "--dataset", str(ds5),
               "--out", str(tmp_path / "ev")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "label mismatch" in err
    assert "second_s1_l2_xx" in err


def test_eval_p_train_boundary(tmp_path):
    ds = gen_tiny(tmp_path, samples=10, depth=4)
    run = tmp_path / "run"
    assert main(["train", "--dataset", str(ds), "--out", str(run),
                 "--epochs", "1", "--batch-size", "4", "--hidden", "3",
                 "--p-train", "2"]) == 0
    ev = tmp_path / "ev"
    assert main(["eval", "--model", str(run / "model.bin"), "--dataset", str(ds),
                 "--out", str(ev)]) == 0
    report = read_csv(ev / "report.csv")
    assert [r[1] for r in report[1:]] == ["interpolated"] * 2 + ["extrapolated"] * 2
    # explicit boundary at the full depth leaves nothing extrapolated
    ev2 = tmp_path / "ev2"
    assert main(["eval", "--model", str(run / "model.bin"), "--dataset", str(ds),
                 "--out", str(ev2), "--p-train", "4"]) == 0
    report2 = read_csv(ev2 / "report.csv")
    assert {r[1] for r in report2[1:]} == {"interpolated"}


def test_eval_size_extrapolation_cli(tmp_path):
    ds3 = gen_tiny(tmp_path, "i3", n=3, samples=10, homogeneous=False)
    ds4 = gen_tiny(tmp_path, "i4", n=4, samples=6, homogeneous=False)
    run = tmp_path / "conv"
    assert main(["train", "--dataset", str(ds3), "--out", str(run),
                 "--epochs", "1", "--batch-size", "4", "--hidden", "3"]) == 0
    ev = tmp_path / "ev"
    rc = main(["eval", "--model", str(run / "model.bin"), "--dataset", str(ds4),
               "--out", str(ev), "--size-extrapolation"])
    assert rc == 0
    rows = read_csv(ev / "observables.csv")
    assert len(rows) == 13  # 12 trained channels + header
