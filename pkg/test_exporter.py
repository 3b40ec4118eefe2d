"""
Tests for the feature CSV and evaluation report CSV formats.
"""

import numpy as np
import pytest

from fruit_disease.errors import FeatureFormatError, ReportFormatError
from fruit_disease.evaluation import EvaluationReport, ReportRow
from fruit_disease.exporter import (
    FeatureRecord,
    read_feature_csv,
    read_report_csv,
    records_matrix,
    report_to_csv,
    write_feature_csv,
    write_report_csv,
)
from fruit_disease.features import DescriptorId, DescriptorKind, FeatureSpec, FeatureVector


def gch_record(path, label, values, colorspace="hsv"):
    spec = FeatureSpec(DescriptorId(DescriptorKind.GCH, bins=2), colorspace)
    return FeatureRecord(path, label, spec, FeatureVector(spec.descriptor, np.asarray(values, dtype=float), (8,)))


def random_histogram(rng):
    values = rng.random(8)
    return values / values.sum()


def sample_report():
    classes = ("apple_rot", "normal")
    trials = (
        ReportRow("clbp", "hsv", 10, 0, 87.5, (75.0, 100.0)),
        ReportRow("clbp", "hsv", 10, 1, 1 / 3 * 100, (None, 1 / 3 * 100)),
        ReportRow("gch", "rgb", 20, 0, 50.0, (0.0, 100.0)),
    )
    rows = (
        ReportRow("clbp", "hsv", 10, None, (87.5 + 100 / 3) / 2, (75.0, (100.0 + 100 / 3) / 2)),
        ReportRow("gch", "rgb", 20, None, 50.0, (0.0, 100.0)),
    )
    return EvaluationReport(classes=classes, rows=rows, trials=trials,
                            metadata={"seed": "42", "trials": "2", "config_hash": "f00d"})


def test_feature_csv_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    records = [gch_record(f"data/rot/{i}.png", "apple_rot" if i % 2 else "normal", random_histogram(rng))
               for i in range(5)]
    path = tmp_path / "out" / "features.csv"
    write_feature_csv(path, records)
    assert read_feature_csv(path) == records

    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == "path,label,descriptor_id," + ",".join(f"v{i}" for i in range(8))

    X, labels, spec = records_matrix(read_feature_csv(path))
    assert X.shape == (5, 8)
    assert labels == [r.label for r in records]
    assert spec.token() == "gch/hsv:bins=2"


def test_paths_with_commas_survive(tmp_path):
    record = gch_record("data/a, b/x.png", "normal", np.full(8, 0.125))
    write_feature_csv(tmp_path / "f.csv", [record])
    assert read_feature_csv(tmp_path / "f.csv")[0].path == "data/a, b/x.png"


def test_feature_csv_errors(tmp_path):
    with pytest.raises(FeatureFormatError):
        read_feature_csv(tmp_path / "missing.csv")
    bad_header = tmp_path / "header.csv"
    bad_header.write_text("file,class,kind\n")
    with pytest.raises(FeatureFormatError):
        read_feature_csv(bad_header)
    short = tmp_path / "short.csv"
    short.write_text("path,label,descriptor_id,v0\nx.png,normal,gch/hsv:bins=2,1.0\n")
    with pytest.raises(FeatureFormatError):
        read_feature_csv(short)
    garbled = tmp_path / "garbled.csv"
    garbled.write_text("path,label,descriptor_id,v0\nx.png,normal,gch/hsv:bins=2,abc\n")
    with pytest.raises(FeatureFormatError):
        read_feature_csv(garbled)


def test_records_must_share_one_spec():
    a = gch_record("a.png", "x", np.full(8, 0.125))
    b = gch_record("b.png", "y", np.full(8, 0.125), colorspace="rgb")
    with pytest.raises(FeatureFormatError):
        records_matrix([a, b])
    with pytest.raises(FeatureFormatError):
        records_matrix([])


def test_report_layout():
    lines = report_to_csv(sample_report()).splitlines()
    assert lines[:3] == ["#seed=42", "#trials=2", "#config_hash=f00d"]
    assert lines[3] == "feature,colorspace,M,trial,overall_acc,acc_apple_rot,acc_normal"
    assert [line.split(",")[3] for line in lines[4:]] == ["0", "1", "mean", "0", "mean"]
    assert lines[5].split(",")[5] == ""


def test_report_round_trip(tmp_path):
    report = sample_report()
    path = tmp_path / "reports" / "sweep.csv"
    write_report_csv(path, report)
    assert read_report_csv(path) == report


def test_report_errors(tmp_path):
    with pytest.raises(ReportFormatError):
        read_report_csv(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("feature,colorspace\n")
    with pytest.raises(ReportFormatError):
        read_report_csv(bad)
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("feature,colorspace,M,trial,overall_acc,acc_a\ngch,hsv,10,mean\n")
    with pytest.raises(ReportFormatError):
        read_report_csv(ragged)
    garbled = tmp_path / "garbled.csv"
    garbled.write_text("feature,colorspace,M,trial,overall_acc,acc_a\ngch,hsv,ten,mean,50.0,50.0\n")
    with pytest.raises(ReportFormatError):
        read_report_csv(garbled)
    with pytest.raises(ReportFormatError):
        report_to_csv(EvaluationReport(classes=("a",), rows=(), metadata={"a=b": "1"}))
