"""Command-line interface, end to end on a tiny synthetic dataset."""

import csv
import os

import numpy as np
import pytest
from PIL import Image

from ucmnet.cli import main

from helpers import write_circle_dataset


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    manifest = write_circle_dataset(str(root / "data"), n=6, size=64, seed=3)
    cfg_path = root / "run.cfg"
    cfg_path.write_text(
        f"manifest = {manifest}\n"
        f"checkpoint_dir = {root / 'ckpt'}\n"
        "input_size = 64\n"
        "epochs = 2\n"
        "seed = 0\n"
        "rotation_degrees = 0\n")
    return {"root": root, "manifest": manifest, "cfg": str(cfg_path)}


@pytest.fixture(scope="module")
def trained(workspace):
    assert main(["train", "--config", workspace["cfg"]]) == 0
    ckpt = workspace["root"] / "ckpt"
    assert (ckpt / "history.csv").exists()
    return {**workspace, "weights": str(ckpt / "final.ucmw"),
            "history": str(ckpt / "history.csv")}


def test_train_writes_history_rows(trained):
    with open(trained["history"]) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert set(rows[0]) == {"epoch", "lr", "train_loss", "test_miou",
                            "test_mdice", "test_miou_star", "test_mdice_star"}


def test_epochs_override(workspace, tmp_path):
    code = main(["train", "--config", workspace["cfg"], "--epochs", "1",
                 "--checkpoint-dir", str(tmp_path / "ck1")])
    assert code == 0
    with open(tmp_path / "ck1" / "history.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 1


def test_train_missing_manifest_exits_3(workspace, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("manifest = /nonexistent/manifest.csv\ninput_size = 64\n")
    assert main(["train", "--config", str(cfg)]) == 3
    assert "/nonexistent/manifest.csv" in capsys.readouterr().err


def test_unknown_config_key_exits_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("velocity = 11\n")
    assert main(["train", "--config", str(cfg)]) == 2


def test_numeric_abort_exits_4(workspace, tmp_path, monkeypatch):
    import ucmnet.training as training
    from ucmnet.tensor import Tensor

    def poisoned(out, stages, target, cfg=None):
        return Tensor(np.array(np.nan, np.float32))

    monkeypatch.setattr(training, "group_loss", poisoned)
    code = main(["train", "--config", workspace["cfg"],
                 "--checkpoint-dir", str(tmp_path / "ck")])
    assert code == 4


def test_eval_outputs_metrics(trained, tmp_path, capsys):
    out_csv = tmp_path / "metrics.csv"
    code = main(["eval", "--weights", trained["weights"],
                 "--manifest", trained["manifest"],
                 "--config", trained["cfg"], "--out", str(out_csv)])
    assert code == 0
    assert "mIoU" in capsys.readouterr().out
    with open(out_csv) as fh:
        row = next(csv.DictReader(fh))
    assert row["split"] == "test" and row["n_images"] == "6"


def test_eval_reproduces_history_bitwise(trained):
    with open(trained["history"]) as fh:
        last = list(csv.DictReader(fh))[-1]
    from ucmnet import build_variant
    from ucmnet.config import load_config
    from ucmnet.data import read_manifest
    from ucmnet.serialize import load_weights
    from ucmnet.training import evaluate

    cfg = load_config(trained["cfg"])
    model = build_variant(cfg.network_config(), seed=1234)
    load_weights(model, trained["weights"])
    report = evaluate(model, read_manifest(trained["manifest"]), "test",
                      cfg.input_size)
    assert f"{report.miou:.8f}" == last["test_miou"]
    assert f"{report.mdice_star:.8f}" == last["test_mdice_star"]


def test_eval_empty_split_exits_3(trained, tmp_path):
    bad = tmp_path / "train_only.csv"
    with open(trained["manifest"]) as fh:
        rows = [r for r in csv.reader(fh)]
    with open(bad, "w", newline="") as fh:
        w = csv.writer(fh)
        for r in rows:
            if r[2] != "test":
                w.writerow(r)
    code = main(["eval", "--weights", trained["weights"], "--manifest",
                 str(bad), "--config", trained["cfg"]])
    assert code == 3


def test_eval_wrong_architecture_exits_3(trained, tmp_path):
    cfg = tmp_path / "wide.cfg"
    cfg.write_text("input_size = 64\nchannels = 16,24,32,48,64,96\n")
    code = main(["eval", "--weights", trained["weights"],
                 "--manifest", trained["manifest"], "--config", str(cfg)])
    assert code == 3


def test_predict_mask_contract(trained, tmp_path):
    src_dir = os.path.dirname(trained["manifest"])
    image = os.path.join(src_dir, "img_0.png")
    out1 = tmp_path / "mask1.png"
    out2 = tmp_path / "mask2.png"
    for out in (out1, out2):
        assert main(["predict", "--weights", trained["weights"], "--image",
                     image, "--out", str(out), "--config", trained["cfg"]]) == 0
    with Image.open(out1) as m:
        assert m.size == Image.open(image).size
        values = set(np.asarray(m).reshape(-1).tolist())
    assert values <= {0, 255}
    assert out1.read_bytes() == out2.read_bytes()


def test_predict_unreadable_image_exits_3(trained, tmp_path):
    assert main(["predict", "--weights", trained["weights"],
                 "--image", str(tmp_path / "ghost.png"),
                 "--out", str(tmp_path / "o.png"),
                 "--config", trained["cfg"]]) == 3


def test_profile_prints_table4_numbers(capsys):
    assert main(["profile"]) == 0
    out = capsys.readouterr().out
    assert "49932" in out
    assert "0.0465" in out


def test_profile_csv(tmp_path):
    out = tmp_path / "cost.csv"
    assert main(["profile", "--csv", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "layer,params,macs,elementwise"


def test_ablate_row_order_and_values(capsys):
    assert main(["ablate"]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("variant")]
    assert [l.split()[0] for l in lines] == [
        "variant_a_doubleconv", "variant_b_conv1x1", "variant_c_ucm"]
    c_row = lines[2].split()
    assert c_row[1] == "49932"
    assert abs(float(c_row[2]) - 0.0465) / 0.0465 <= 0.05


def test_split_command(tmp_path, workspace):
    src = tmp_path / "flat.csv"
    with open(src, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["image", "mask"])
        for i in range(10):
            w.writerow([f"i{i}.png", f"m{i}.png"])
    out = tmp_path / "split.csv"
    assert main(["split", "--manifest", str(src), "--out", str(out),
                 "--ratio", "0.7", "--seed", "1"]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert sum(1 for r in rows if r["split"] == "train") == 7
    assert sum(1 for r in rows if r["split"] == "test") == 3


def test_init_config_roundtrip(tmp_path):
    out = tmp_path / "default.cfg"
    assert main(["init-config", "--out", str(out)]) == 0
    from ucmnet.config import RunConfig, load_config
    assert load_config(str(out)) == RunConfig()
