import json
import subprocess
import sys

import numpy as np
import pytest

from csocr.cli import main
from csocr.pnm import read_gray, write_gray


@pytest.fixture
def two_blobs(tmp_path):
    px = np.ones((40, 60))
    px[5:13, 6:14] = 0.0
    px[20:30, 35:43] = 0.1
    path = tmp_path / "plate.pgm"
    write_gray(path, px)
    return path


# --- segment --------------------------------------------------------------------------

def test_segment_blank_image(tmp_path):
    write_gray(tmp_path / "blank.pgm", np.full((20, 20), 0.8))
    assert main(["segment", str(tmp_path / "blank.pgm"), "--out", str(tmp_path / "o")]) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["segments"] == []


def test_segment_two_blobs(tmp_path, two_blobs):
    out = tmp_path / "segs"
    assert main(["segment", str(two_blobs), "--out", str(out)]) == 0
    assert sorted(p.name for p in out.glob("seg_*.pgm")) == ["seg_000.pgm", "seg_001.pgm"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert [s["bbox"] for s in manifest["segments"]] == [[6, 5, 8, 8], [35, 20, 8, 10]]
    assert [s["pixel_count"] for s in manifest["segments"]] == [64, 80]
    seg = read_gray(out / "seg_000.pgm").pixels
    assert seg.shape == (16, 16) and np.all(seg == 0.0)   # ink is written black


def test_segment_huge_min_pixels(tmp_path, two_blobs):
    out = tmp_path / "segs"
    assert main(["segment", str(two_blobs), "--out", str(out),
                 "--min-pixels", "100000"]) == 0
    assert not list(out.glob("seg_*.pgm"))


def test_segment_unreadable_input(tmp_path, capsys):
    assert main(["segment", str(tmp_path / "missing.pgm"), "--out", str(tmp_path)]) == 1
    assert "missing.pgm" in capsys.readouterr().err


# --- sense / reconstruct --------------------------------------------------------------

def test_sense_is_byte_identical(tmp_path):
    for name in ("a.csv", "b.csv"):
        assert main(["sense", "--matrix-out", str(tmp_path / name), "--m", "64",
                     "--n", "256", "--seed", "1"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert len((tmp_path / "a.csv").read_text().splitlines()) == 65


def test_sense_bound_report(capsys):
    assert main(["sense", "--sparsity", "8", "--n", "256"]) == 0
    assert "m >= 28" in capsys.readouterr().out


def test_reconstruct_dimension_mismatch(tmp_path, capsys):
    assert main(["sense", "--matrix-out", str(tmp_path / "A.csv"), "--m", "8",
                 "--n", "16"]) == 0
    assert main(["sense", "--matrix-out", str(tmp_path / "B.csv"), "--m", "6",
                 "--n", "256", "--synthetic", "1",
                 "--features-out", str(tmp_path / "f.csv")]) == 0
    code = main(["reconstruct", "--matrix", str(tmp_path / "A.csv"),
                 "--features", str(tmp_path / "f.csv"), "--out", str(tmp_path / "r")])
    assert code == 1
    assert "dimension mismatch" in capsys.readouterr().err


@pytest.mark.parametrize("method", ["tv", "bp"])
def test_reconstruct_writes_images(tmp_path, method):
    assert main(["sense", "--matrix-out", str(tmp_path / "A.csv"), "--m", "160",
                 "--synthetic", "1", "--features-out", str(tmp_path / "f.csv")]) == 0
    assert main(["reconstruct", "--matrix", str(tmp_path / "A.csv"),
                 "--features", str(tmp_path / "f.csv"), "--rows", "0,3",
                 "--method", method, "--out", str(tmp_path / "r")]) == 0
    report = json.loads((tmp_path / "r" / "reconstruction.json").read_text())
    assert [r["row"] for r in report] == [0, 3]
    assert read_gray(tmp_path / "r" / "recon_003.pgm").pixels.shape == (16, 16)


# --- train / predict / evaluate -------------------------------------------------------

def test_train_predict_roundtrip(tmp_path):
    feats = str(tmp_path / "f.csv")
    assert main(["sense", "--m", "64", "--synthetic", "10", "--seed", "3",
                 "--features-out", feats]) == 0
    assert main(["train", "--features", feats, "--model-out",
                 str(tmp_path / "model.json")]) == 0
    assert main(["predict", "--model", str(tmp_path / "model.json"),
                 "--features", feats, "--out", str(tmp_path / "p.csv")]) == 0
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "index,predicted,true" and len(lines) == 101
    hits = sum(r.split(",")[1] == r.split(",")[2] for r in lines[1:])
    assert hits >= 98


def test_train_rejects_unlabelled(tmp_path):
    assert main(["sense", "--m", "8", "--n", "16"]) == 0
    (tmp_path / "u.csv").write_text("1.0,2.0,?\n3.0,1.0,?\n")
    assert main(["train", "--features", str(tmp_path / "u.csv"),
                 "--model-out", str(tmp_path / "m.json")]) == 1


def test_evaluate_writes_reports(tmp_path):
    out = tmp_path / "ev"
    assert main(["evaluate", "--synthetic", "20", "--m", "32", "--runs", "3",
                 "--seed", "7", "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["accuracy.csv", "confusion_run_00.csv", "confusion_run_01.csv",
                     "confusion_run_02.csv", "confusion_total.csv", "report.csv",
                     "report.json"]
    report = json.loads((out / "report.json").read_text())
    assert report["runs"] == 3 and report["config"]["base_seed"] == 7


def test_synth_then_evaluate_directory(tmp_path):
    assert main(["synth", "--per-class", "10", "--seed", "2",
                 "--out", str(tmp_path / "data")]) == 0
    assert len(list((tmp_path / "data").glob("*/*.pgm"))) == 100
    assert main(["evaluate", "--dataset", str(tmp_path / "data"), "--m", "32",
                 "--runs", "2", "--out", str(tmp_path / "ev")]) == 0


# --- usage ----------------------------------------------------------------------------

@pytest.mark.parametrize("argv", [
    [],
    ["evaluate", "--out", "x"],                       # no data source
    ["evaluate", "--synthetic", "5", "--dataset", "d", "--out", "x"],
    ["sense", "--m", "0"],
    ["reconstruct", "--matrix", "A.csv"],
    ["segment", "in.pgm", "--out", "o", "--connectivity", "6"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("command", ["segment", "sense", "reconstruct", "train",
                                     "predict", "evaluate", "synth"])
def test_help_documents_defaults(command, capsys):
    assert main([command, "--help"]) == 0
    assert "default" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "csocr", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "evaluate" in proc.stdout
