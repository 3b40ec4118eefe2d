"""
End-to-end tests of the command-line entry point.
"""

import logging

import pytest

from fruit_disease.constants import SYNTHETIC_CLASSES, __version__
from fruit_disease.exporter import read_feature_csv, read_report_csv
from fruit_disease.image_io import load_mask
from fruit_disease.main import main


@pytest.fixture(autouse=True)
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "data"
    assert main(["gen-dataset", "--out", str(out), "--per-class", "6", "--size", "48",
                 "--seed", "3", "--threads", "2"]) == 0
    return out


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out

    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--version"])
    assert exc.value.code == 0


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["segment", "--image", "x.png", "--bogus"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err

    with pytest.raises(SystemExit) as exc:
        main(["gen-dataset", "--out", "x", "--threads", "0"])
    assert exc.value.code == 2

    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_module_error_exits_1(tmp_path, capsys):
    assert main(["segment", "--image", str(tmp_path / "missing.png")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error: ") and len(err.strip().splitlines()) == 1


def test_config_error_exits_2(tmp_path, capsys):
    assert main(["gen-dataset", "--out", str(tmp_path), "--config", str(tmp_path / "none.yaml")]) == 2
    assert "error:" in capsys.readouterr().err


def test_gen_dataset(dataset, capsys):
    for kind in SYNTHETIC_CLASSES:
        assert len(list((dataset / kind).glob("*.png"))) == 6
    assert (dataset / "manifest.yaml").is_file()


def test_segment_writes_artifacts(dataset, tmp_path, capsys):
    image = dataset / "apple_rot" / "apple_rot_0000.png"
    argv = ["segment", "--image", str(image), "--k", "3", "--policy", "darkest",
            "--mask-out", str(tmp_path / "mask.png"), "--clusters-out", str(tmp_path / "clusters"),
            "--labels-out", str(tmp_path / "labels.png"), "--planes-out", str(tmp_path / "planes")]
    assert main(argv) == 0
    out = capsys.readouterr().out
    assert out.startswith("selected cluster: ")
    assert out.count("centroid a*=") == 3
    assert load_mask(tmp_path / "mask.png").shape == (48, 48)
    assert sorted(p.name for p in (tmp_path / "clusters").iterdir()) == [f"cluster_{c}.png" for c in range(3)]
    assert (tmp_path / "labels.png").is_file()
    assert len(list((tmp_path / "planes").glob("lab_*.png"))) == 3


def test_extract_train_predict(dataset, tmp_path, capsys):
    features = tmp_path / "features.csv"
    model = tmp_path / "model.msvm"
    assert main(["extract", "--data", str(dataset), "--feature", "gch", "--colorspace", "hsv",
                 "--out", str(features), "--threads", "2"]) == 0
    records = read_feature_csv(features)
    assert len(records) == 4 * 6
    assert {r.spec.token() for r in records} == {"gch/hsv:bins=4"}

    assert main(["train", "--features", str(features), "--C", "5", "--model-out", str(model)]) == 0
    capsys.readouterr()

    image = dataset / "apple_scab" / "apple_scab_0001.png"
    assert main(["predict", "--model", str(model), "--image", str(image)]) == 0
    lines = capsys.readouterr().out.splitlines()
    name, _, predicted = lines[0].rpartition(": ")
    assert name == str(image) and predicted in SYNTHETIC_CLASSES
    assert [line.split(":")[0].strip() for line in lines[1:]] == list(SYNTHETIC_CLASSES)

    assert main(["predict", "--model", str(model), "--features", str(features),
                 "--decoding", "ignore-zeros"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 24 * 5


def test_predict_rejects_foreign_features(dataset, tmp_path, capsys):
    gch = tmp_path / "gch.csv"
    lbp = tmp_path / "lbp.csv"
    model = tmp_path / "model.msvm"
    images = [str(dataset / kind / f"{kind}_0000.png") for kind in SYNTHETIC_CLASSES]
    extract = ["extract", "--feature", "gch", "--no-segment", "--out", str(gch)]
    for path in images + [str(dataset / kind / f"{kind}_0001.png") for kind in SYNTHETIC_CLASSES]:
        extract += ["--image", path]
    assert main(extract) == 0
    assert main(["train", "--features", str(gch), "--model-out", str(model)]) == 0
    assert main(["extract", "--feature", "lbp", "--no-segment", "--image", images[0], "--out", str(lbp)]) == 0
    capsys.readouterr()
    assert main(["predict", "--model", str(model), "--features", str(lbp)]) == 2
    assert "model expects" in capsys.readouterr().err


def test_evaluate_report_is_deterministic(dataset, tmp_path, capsys):
    first, second = tmp_path / "first.csv", tmp_path / "second.csv"
    argv = ["evaluate", "--data", str(dataset), "--features", "gch,lbp", "--colorspaces", "hsv",
            "--train-per-class", "2,4", "--trials", "2", "--seed", "5"]
    assert main(argv + ["--report", str(first), "--threads", "3"]) == 0
    out = capsys.readouterr().out
    assert "ranking" in out and "wrote 4 mean rows and 8 trial rows" in out
    assert main(argv + ["--report", str(second), "--threads", "1"]) == 0

    assert first.read_bytes() == second.read_bytes()
    report = read_report_csv(first)
    assert len(report.rows) == 4 and len(report.trials) == 8
    assert report.classes == SYNTHETIC_CLASSES
    assert report.metadata["seed"] == "5" and len(report.metadata["config_hash"]) == 64


@pytest.mark.slow
def test_synthetic_benchmark(tmp_path):
    data, report_path = tmp_path / "bench", tmp_path / "bench.csv"
    assert main(["gen-dataset", "--out", str(data), "--per-class", "80", "--size", "128", "--seed", "42"]) == 0
    assert main(["evaluate", "--data", str(data), "--features", "clbp,lbp,gch,ccv", "--colorspaces", "hsv",
                 "--train-per-class", "10,50", "--trials", "5", "--seed", "42", "--report", str(report_path)]) == 0

    report = read_report_csv(report_path)
    assert report.row("clbp", "hsv", 50).overall >= 90.0
    for feature in ("clbp", "lbp", "gch", "ccv"):
        small, large = report.row(feature, "hsv", 10), report.row(feature, "hsv", 50)
        assert large.overall >= small.overall - 2.0, f"{feature}: {small.overall:.2f}% -> {large.overall:.2f}%"
