import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from sarcube.cli import main
from sarcube.cube_store import open_cube
from sarcube.experiment import read_results_csv
from sarcube.metrics import read_curve_csv
from sarcube.pgm import read_pgm


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "scene"
    assert main(["synth", "--shape", "128,128", "--pre", "2", "--post", "2", "--seed", "4",
                 "--slc", "--out", str(out)]) == 0
    return out


def test_synth_and_info(scene, capsys):
    assert main(["info", "--cube", str(scene)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["dims"] == {"timestep": 4, "y": 128, "x": 128}
    assert info["variables"]["label"]["dtype"] == "|u1"


def test_terrain_and_insar(scene):
    assert main(["terrain", "--cube", str(scene), "--pixel-size", "10"]) == 0
    assert main(["insar", "--cube", str(scene), "--window", "5,5", "--looks", "1,5"]) == 0
    cube = open_cube(scene)
    assert cube.dims["timepair"] == 3
    coh = cube.read_var("coherence")
    assert coh.shape == (3, 128, 128) and (coh >= 0).all() and (coh <= 1).all()


def test_rasterize(scene, tmp_path):
    gt = open_cube(scene).geotransform
    x0, y0 = gt.origin_x, gt.origin_y
    ring = [[x0, y0], [x0 + 200, y0], [x0 + 200, y0 - 100], [x0, y0 - 100], [x0, y0]]
    (tmp_path / "p.json").write_text(json.dumps({"type": "Polygon", "coordinates": [ring]}))
    assert main(["rasterize", "--cube", str(scene), "--polygons", str(tmp_path / "p.json"),
                 "--var", "inventory"]) == 0
    m = open_cube(scene).read_var("inventory")
    assert m[:10, :20].all() and m.sum() == 200


def test_fetch(tmp_path, capsys):
    src = tmp_path / "blob.bin"
    src.write_bytes(b"payload")
    digest = hashlib.sha256(b"payload").hexdigest()
    assert main(["fetch", "--url", src.as_uri(), "--sha256", digest,
                 "--out", str(tmp_path / "dl")]) == 0
    assert (tmp_path / "dl" / "blob.bin").read_bytes() == b"payload"
    assert main(["fetch", "--url", src.as_uri(), "--sha256", "0" * 64,
                 "--out", str(tmp_path / "dl2")]) == 1
    assert "error" in capsys.readouterr().err


def test_chips_train_predict_eval(scene, tmp_path):
    chips = tmp_path / "chips"
    assert main(["chips", "--cube", str(scene), "--config", "vvvh", "--k", "2",
                 "--test-fraction", "0.25", "--seed", "1", "--chip", "32",
                 "--out", str(chips)]) == 0
    train_idx = json.loads((chips / "train" / "index.json").read_text())
    test_idx = json.loads((chips / "test" / "index.json").read_text())
    assert train_idx["channels"] == ["VV_pre", "VH_pre", "VV_post", "VH_post"]
    assert set(train_idx["splits"]) == {"train"} and set(test_idx["splits"]) == {"test"}
    assert (chips / "stats.json").exists()

    cfg = tmp_path / "train.json"
    cfg.write_text(json.dumps({"epochs": 2, "batch_size": 4, "base_width": 4, "depth": 2}))
    ckpt = tmp_path / "model.ckpt"
    assert main(["train", "--chips", str(chips), "--config", str(cfg), "--out", str(ckpt)]) == 0
    assert ckpt.read_bytes()[:8] == b"SARCKPT\0"

    out = tmp_path / "pred"
    assert main(["predict", "--ckpt", str(ckpt), "--chips", str(chips), "--out", str(out)]) == 0
    scores = open_cube(out / "scores").read_var("score")
    assert scores.shape[0] == len(test_idx["origins"])
    y0, x0 = test_idx["origins"][0]
    img, maxval = read_pgm(out / f"chip_{y0:05d}_{x0:05d}_score.pgm")
    np.testing.assert_array_equal(img, np.rint(scores[0] * 65535))

    assert main(["eval", "--ckpt", str(ckpt), "--chips", str(chips),
                 "--out", str(tmp_path / "metrics.csv")]) == 0
    curve = read_curve_csv(tmp_path / "metrics.csv")
    assert 0 <= curve.auprc <= 1 and 0 < curve.prevalence < 1


def test_chips_config_json(scene, tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"channel_set": "DEM_only", "k": 1}))
    assert main(["chips", "--cube", str(scene), "--config", str(tmp_path / "c.json"),
                 "--chip", "32", "--test-fraction", "0.3", "--out", str(tmp_path / "o")]) == 0
    idx = json.loads((tmp_path / "o" / "train" / "index.json").read_text())
    assert idx["channel_set"] == "DEM_only" and len(idx["channels"]) == 4


def test_ablate_flags_and_config(scene, tmp_path):
    base = ["--cube", str(scene), "--epochs", "1", "--width", "2", "--depth", "1",
            "--chip", "32", "--test-fraction", "0.25"]
    assert main(["ablate", *base, "--sets", "vv,dem", "--ks", "1,2", "--seeds", "1",
                 "--out", str(tmp_path / "a")]) == 0
    rows = read_results_csv(tmp_path / "a" / "results.csv")
    assert [(r.channel_set, r.k) for r in rows] == \
        [("VV_only", 1), ("VV_only", 2), ("DEM_only", 1), ("DEM_only", 2)]
    cfg = {"cube": str(scene), "sets": ["vh"], "ks": [1], "seeds": [3], "epochs": 1,
           "width": 2, "depth": 1, "chip": 32, "test_fraction": 0.25}
    (tmp_path / "ab.json").write_text(json.dumps(cfg))
    assert main(["ablate", "--config", str(tmp_path / "ab.json"), "--out", str(tmp_path / "b")]) == 0
    rows = read_results_csv(tmp_path / "b" / "results.csv")
    assert [(r.channel_set, r.k, r.seed) for r in rows] == [("VH_only", 1, 3)]


def test_ablate_rejects_unknown_config_key(tmp_path):
    (tmp_path / "bad.json").write_text(json.dumps({"cube": "x", "out": "y", "colour": 1}))
    with pytest.raises(SystemExit):
        main(["ablate", "--config", str(tmp_path / "bad.json")])


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sarcube.cli", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and "ablate" in proc.stdout
